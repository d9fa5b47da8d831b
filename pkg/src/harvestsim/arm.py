"""5-DOF serial arm: DH forward kinematics, PSO goal solving, trajectories.

Joint transforms follow the standard convention Rz(theta+offset) Tz(d)
Tx(a) Rx(alpha).  The tool approach axis is the z axis of the last frame.
Goal solving runs global-best PSO with the canonical velocity rule; the
swarm is seeded from the best of a coarse random pre-scan, which keeps the
stock update rule while avoiding most mirror-configuration basins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Unreachable, VelocityInfeasible


@dataclass(frozen=True)
class DhJoint:
    """One joint row: link length a (mm), twist alpha (rad), offset d (mm),
    fixed angle offset (rad), and position limits (rad)."""

    a: float
    alpha: float
    d: float
    offset: float
    limit_low: float
    limit_high: float

    def validate(self) -> None:
        if not self.limit_low < self.limit_high:
            raise ValueError("joint limit_low must be < limit_high")


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple[DhJoint, ...]

    def __post_init__(self) -> None:
        if len(self.joints) != 5:
            raise ValueError("chain must have exactly 5 joints")

    def validate(self) -> None:
        for j in self.joints:
            j.validate()

    @property
    def limits_low(self) -> np.ndarray:
        return np.array([j.limit_low for j in self.joints])

    @property
    def limits_high(self) -> np.ndarray:
        return np.array([j.limit_high for j in self.joints])

    @property
    def bounding_reach(self) -> float:
        """Upper bound on the tool distance from the base (mm)."""
        return float(sum(abs(j.a) + abs(j.d) for j in self.joints))

    def within_limits(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.limits_low - tol)
                    and np.all(q <= self.limits_high + tol))


#: default chain approximating a 750 mm-reach tabletop arm (repository
#: values, not measured from any hardware).
DEFAULT_CHAIN = KinematicChain(joints=(
    DhJoint(a=0.0, alpha=math.pi / 2, d=110.0, offset=0.0,
            limit_low=-math.pi, limit_high=math.pi),
    DhJoint(a=300.0, alpha=0.0, d=0.0, offset=math.pi / 2,
            limit_low=-1.8, limit_high=1.8),
    DhJoint(a=250.0, alpha=0.0, d=0.0, offset=0.0,
            limit_low=-2.2, limit_high=2.2),
    DhJoint(a=0.0, alpha=math.pi / 2, d=0.0, offset=math.pi / 2,
            limit_low=-1.8, limit_high=1.8),
    DhJoint(a=0.0, alpha=0.0, d=150.0, offset=0.0,
            limit_low=-math.pi, limit_high=math.pi),
))


@dataclass(frozen=True)
class Pose:
    """Tool position (mm) and unit approach direction."""

    position: np.ndarray
    approach: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "approach", np.asarray(self.approach, dtype=float))
        norm = float(np.linalg.norm(self.approach))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"approach direction norm {norm} != 1")


def fk_batch(chain: KinematicChain, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions (N,3) and approach axes (N,3) for configurations (N,5)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = q.shape[0]
    transform = np.tile(np.eye(4), (n, 1, 1))
    for idx, joint in enumerate(chain.joints):
        theta = q[:, idx] + joint.offset
        ct, st = np.cos(theta), np.sin(theta)
        ca, sa = math.cos(joint.alpha), math.sin(joint.alpha)
        step = np.zeros((n, 4, 4))
        step[:, 0, 0] = ct
        step[:, 0, 1] = -st * ca
        step[:, 0, 2] = st * sa
        step[:, 0, 3] = joint.a * ct
        step[:, 1, 0] = st
        step[:, 1, 1] = ct * ca
        step[:, 1, 2] = -ct * sa
        step[:, 1, 3] = joint.a * st
        step[:, 2, 1] = sa
        step[:, 2, 2] = ca
        step[:, 2, 3] = joint.d
        step[:, 3, 3] = 1.0
        transform = transform @ step
    return transform[:, :3, 3], transform[:, :3, 2]


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """Tool pose for one joint configuration (5 angles, rad)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (5,):
        raise ValueError("joint vector must have 5 entries")
    pos, axis = fk_batch(chain, q[None, :])
    return Pose(position=pos[0], approach=axis[0])


@dataclass(frozen=True)
class PsoParams:
    particle_count: int = 30
    iteration_count: int = 200
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 0
    presample: int = 1000         # coarse random scan seeding the swarm
    direction_weight: float = 0.5  # mm-equivalent per radian of axis error
    limit_weight: float = 10.0
    converged_cost: float = 2.0   # mm-equivalent

    def validate(self) -> None:
        if self.particle_count < 2:
            raise ValueError("particle_count must be >= 2")
        if not 0.0 <= self.inertia <= 1.0:
            raise ValueError("inertia must be in [0, 1]")
        if self.cognitive <= 0.0 or self.social <= 0.0:
            raise ValueError("cognitive and social weights must be > 0")
        if self.iteration_count < 1:
            raise ValueError("iteration_count must be >= 1")


@dataclass
class PsoResult:
    q: np.ndarray
    cost: float
    converged: bool
    cost_history: np.ndarray  # global best after init and each iteration


def pso_solve_goal(chain: KinematicChain, target: Pose,
                   params: PsoParams = PsoParams()) -> PsoResult:
    """Global-best PSO toward a tool pose.

    Cost is position error (mm) + direction_weight * approach-axis angle
    (rad) + limit_weight * squared limit violation.  Deterministic per
    params.seed; the returned configuration is clamped into limits.  A
    result with cost above converged_cost is returned flagged rather than
    raised; targets beyond the bounding reach raise Unreachable.
    """
    params.validate()
    chain.validate()
    if float(np.linalg.norm(target.position)) > chain.bounding_reach:
        raise Unreachable(
            f"target at {np.linalg.norm(target.position):.1f} mm exceeds "
            f"reach {chain.bounding_reach:.1f} mm")
    rng = np.random.default_rng(params.seed)
    low, high = chain.limits_low, chain.limits_high
    span = high - low

    def cost(qs: np.ndarray) -> np.ndarray:
        pos, axis = fk_batch(chain, qs)
        err = np.linalg.norm(pos - target.position, axis=1)
        dot = np.clip(axis @ target.approach, -1.0, 1.0)
        err = err + params.direction_weight * np.arccos(dot)
        viol = (np.maximum(0.0, qs - high).sum(axis=1)
                + np.maximum(0.0, low - qs).sum(axis=1))
        return err + params.limit_weight * viol ** 2

    n = params.particle_count
    candidates = rng.uniform(low, high, (max(params.presample, n), 5))
    order = np.argsort(cost(candidates), kind="stable")
    positions = candidates[order[:n]].copy()
    velocities = np.zeros((n, 5))
    vmax = 0.5 * span

    pbest = positions.copy()
    pbest_cost = cost(positions)
    g_idx = int(np.argmin(pbest_cost))
    gbest = pbest[g_idx].copy()
    gbest_cost = float(pbest_cost[g_idx])
    history = [gbest_cost]

    for _ in range(params.iteration_count):
        r1 = rng.random((n, 5))
        r2 = rng.random((n, 5))
        velocities = (params.inertia * velocities
                      + params.cognitive * r1 * (pbest - positions)
                      + params.social * r2 * (gbest - positions))
        velocities = np.clip(velocities, -vmax, vmax)
        positions = positions + velocities
        over = positions > high
        under = positions < low
        positions = np.where(over, 2.0 * high - positions, positions)
        positions = np.where(under, 2.0 * low - positions, positions)
        velocities = np.where(over | under, -0.5 * velocities, velocities)
        positions = np.clip(positions, low, high)
        costs = cost(positions)
        better = costs < pbest_cost
        pbest[better] = positions[better]
        pbest_cost[better] = costs[better]
        g_idx = int(np.argmin(pbest_cost))
        if pbest_cost[g_idx] < gbest_cost:
            gbest_cost = float(pbest_cost[g_idx])
            gbest = pbest[g_idx].copy()
        history.append(gbest_cost)

    q = np.clip(gbest, low, high)
    return PsoResult(q=q, cost=gbest_cost,
                     converged=gbest_cost <= params.converged_cost,
                     cost_history=np.array(history))


@dataclass
class JointTrajectory:
    """Uniformly sampled joint-space path, one row per waypoint."""

    dt: float
    times: np.ndarray      # (n,)
    waypoints: np.ndarray  # (n, 5)

    def __len__(self) -> int:
        return len(self.times)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t_s,q1_rad,q2_rad,q3_rad,q4_rad,q5_rad\n")
            for i in range(len(self.times)):
                row = ",".join(f"{v:.9g}" for v in self.waypoints[i])
                fh.write(f"{self.times[i]:.6g},{row}\n")


DEFAULT_VELOCITY_LIMIT = 1.5  # rad/s per joint


def plan_trajectory(chain: KinematicChain, q_start, q_goal, duration: float,
                    dt: float = 0.02,
                    velocity_limit: float = DEFAULT_VELOCITY_LIMIT) -> JointTrajectory:
    """Cubic time-scaled joint-space move with zero boundary velocities.

    Peak joint speed of the cubic is 1.5*|dq|/T; durations too short for
    the velocity cap raise VelocityInfeasible.
    """
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    if q_start.shape != (5,) or q_goal.shape != (5,):
        raise ValueError("joint vectors must have 5 entries")
    if duration <= 0.0 or dt <= 0.0:
        raise ValueError("duration and dt must be > 0")
    for q in (q_start, q_goal):
        if not chain.within_limits(q):
            raise ValueError("endpoint configuration violates joint limits")
    delta = q_goal - q_start
    peak_speed = 1.5 * np.abs(delta) / duration
    if np.any(peak_speed > velocity_limit + 1e-12):
        worst = int(np.argmax(peak_speed))
        raise VelocityInfeasible(
            f"joint {worst + 1} needs {peak_speed[worst]:.3f} rad/s "
            f"> cap {velocity_limit:.3f} over {duration:.3f} s")
    steps = max(1, int(round(duration / dt)))
    times = np.arange(steps + 1) * dt
    times[-1] = min(times[-1], duration)
    s = times / duration
    scale = 3.0 * s ** 2 - 2.0 * s ** 3
    waypoints = q_start[None, :] + scale[:, None] * delta[None, :]
    return JointTrajectory(dt=dt, times=times, waypoints=waypoints)
