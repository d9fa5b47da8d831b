"""Gripper linkage kinematics and virtual-work torque analysis.

The finger drive is a crank (radius ``r``) pushing a two-link pair (``e``,
``d``) against fixed frame offsets (``a``, ``b``, ``c``, ``f``).  For a crank
angle ``theta`` the two loop-closure equations

    r*cos(theta) + f = a + e*cos(beta) + d*cos(xi)
    c + e*sin(beta)  = b + d*sin(xi)

determine the link angles ``beta`` and ``xi``.  They are solved in closed
form through the frame diagonal ``k`` (law of cosines on the e-d-k
triangle), trying both elbow branches and keeping solutions whose residuals
vanish; when both branches close, the upper configuration (larger driven
point height) is returned so sweeps stay on one continuous branch.

Torque for a transmitted grasp force P comes from the virtual-work balance

    T*dtheta + P*dx_m + P*dy_m = 0

evaluated by central finite differences through the solved linkage
(``torque_virtual_work``, the canonical result).  The closed-form variant
``torque_for_force`` (T = P*finger_arm*sin(xi)*dxi/dtheta + P*r*sin(theta))
is retained for comparison; the two disagree by construction and
``torque_discrepancy_table`` reports the gap rather than hiding it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .errors import (
    DegenerateDiagonal,
    InfeasibleConfiguration,
    NoConsistentBranch,
)

#: loop-closure residual tolerance (mm) a returned state must satisfy
RESIDUAL_TOL = 1e-9

#: central-difference step (rad) for linkage derivatives
FD_STEP = 1e-6


@dataclass(frozen=True)
class GripperGeometry:
    """Linkage dimensions in millimeters, angles in radians.

    ``theta_min``/``theta_max`` declare the admissible crank range; all
    solver entry points check feasibility against the triangle condition,
    not this range, but validation sweeps it.
    """

    r: float          # crank radius
    a: float          # frame offset along the slide axis
    b: float          # follower pivot height
    c: float          # coupler pivot height
    d: float          # follower link length
    e: float          # coupler link length
    f: float          # crank frame offset
    slider_offset: float   # slider offset added to the driven point x
    pivot_height: float    # driven point base height
    finger_arm: float      # finger moment arm carrying the contact point
    gamma: float = 0.35    # nominal structural angle between links e and d
    theta_min: float = 0.0
    theta_max: float = 1.2

    def validate(self, sweep_points: int = 181) -> None:
        """Raise InfeasibleConfiguration if lengths or the declared crank
        range are unusable."""
        for name in ("r", "a", "b", "c", "d", "e", "f",
                     "slider_offset", "pivot_height", "finger_arm"):
            if getattr(self, name) <= 0.0:
                raise InfeasibleConfiguration(f"geometry.{name} must be > 0")
        if not self.theta_min < self.theta_max:
            raise InfeasibleConfiguration("geometry theta range is empty")
        for i in range(sweep_points):
            theta = self.theta_min + (self.theta_max - self.theta_min) * i / (sweep_points - 1)
            solve_linkage(self, theta)


#: documented reference geometry used by the test suite and default config.
#: These numbers are a repository artifact chosen to be feasible over
#: theta in [0, 1.2] rad; they carry no experimental provenance.
REFERENCE_GEOMETRY = GripperGeometry(
    r=15.0, a=40.0, b=10.0, c=25.0, d=35.0, e=30.0, f=20.0,
    slider_offset=12.0, pivot_height=18.0, finger_arm=45.0,
    gamma=0.35, theta_min=0.0, theta_max=1.2,
)


@dataclass(frozen=True)
class LinkageState:
    """Solved configuration at one crank angle.

    ``gamma_eff`` is the actual angle closing ``xi = pi - beta - gamma_eff``
    for this configuration.  It varies with theta; the geometry's fixed
    ``gamma`` is only the nominal design value (see torque_discrepancy_table
    for the sweep diagnostic).
    """

    theta: float
    beta: float
    xi: float
    u: float
    k: float

    @property
    def gamma_eff(self) -> float:
        return math.pi - self.beta - self.xi

    def residuals(self, geom: GripperGeometry) -> tuple[float, float]:
        r1 = (geom.r * math.cos(self.theta) + geom.f - geom.a
              - geom.e * math.cos(self.beta) - geom.d * math.cos(self.xi))
        r2 = (geom.c + geom.e * math.sin(self.beta)
              - geom.b - geom.d * math.sin(self.xi))
        return r1, r2


@dataclass(frozen=True)
class TorqueQuery:
    """Crank angle and transmitted grasp force for a torque evaluation."""

    theta: float
    P: float

    def validate(self) -> None:
        if self.P < 0.0:
            raise ValueError("transmitted force P must be >= 0")


def _wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    y = math.fmod(x + math.pi, 2.0 * math.pi)
    if y <= 0.0:
        y += 2.0 * math.pi
    return y - math.pi


def solve_linkage(geom: GripperGeometry, theta: float) -> LinkageState:
    """Solve the loop closure at crank angle theta (radians).

    Tries the (+/-acos, +/-u) branches and keeps those whose loop residuals
    are below RESIDUAL_TOL, preferring the branch with the higher driven
    point.  Raises InfeasibleConfiguration / DegenerateDiagonal /
    NoConsistentBranch accordingly.
    """
    X = geom.r * math.cos(theta) + geom.f - geom.a
    Y = geom.c - geom.b
    k = math.hypot(X, Y)
    if k < 1e-9:
        raise DegenerateDiagonal(f"diagonal k={k:.3e} mm at theta={theta:.6f}")
    arg = (k * k + geom.e * geom.e - geom.d * geom.d) / (2.0 * geom.e * k)
    if not -1.0 <= arg <= 1.0:
        raise InfeasibleConfiguration(
            f"acos argument {arg:.6f} outside [-1, 1] at theta={theta:.6f}")
    half = math.acos(arg)
    u0 = math.atan2(Y, X)

    best: LinkageState | None = None
    for u in (u0, -u0):
        for sign in (1.0, -1.0):
            beta = _wrap_angle(sign * half - u)
            xi = math.atan2(geom.c + geom.e * math.sin(beta) - geom.b,
                            X - geom.e * math.cos(beta))
            state = LinkageState(theta=theta, beta=beta, xi=xi, u=u, k=k)
            r1, r2 = state.residuals(geom)
            if abs(r1) <= RESIDUAL_TOL and abs(r2) <= RESIDUAL_TOL:
                if best is None or math.sin(xi) > math.sin(best.xi):
                    best = state
    if best is None:
        raise NoConsistentBranch(
            f"no sign branch closes the loop at theta={theta:.6f}")
    return best


def driven_point(geom: GripperGeometry, state: LinkageState) -> tuple[float, float]:
    """Driven contact point (x_m, y_m) in mm for a solved state."""
    x_m = geom.r * math.cos(state.theta) + geom.slider_offset \
        + geom.finger_arm * math.cos(state.xi)
    y_m = geom.pivot_height + geom.finger_arm * math.sin(state.xi)
    return x_m, y_m


def linkage_jacobian(geom: GripperGeometry, theta: float, h: float = FD_STEP) -> float:
    """d(xi)/d(theta) by central finite difference.

    Both probe points must be feasible; the xi difference is taken on the
    wrapped circle so a branch crossing +-pi does not produce a 2*pi jump.
    """
    lo = solve_linkage(geom, theta - h)
    hi = solve_linkage(geom, theta + h)
    return _wrap_angle(hi.xi - lo.xi) / (2.0 * h)


def torque_for_force(geom: GripperGeometry, q: TorqueQuery) -> float:
    """Closed-form torque variant T = P*finger_arm*sin(xi)*dxi/dtheta
    + P*r*sin(theta), in N*mm.  Linear in P at fixed theta.

    This is not consistent with the virtual-work balance (see
    torque_virtual_work); it is kept for the discrepancy diagnostic.
    """
    q.validate()
    state = solve_linkage(geom, q.theta)
    dxi = linkage_jacobian(geom, q.theta)
    return q.P * geom.finger_arm * math.sin(state.xi) * dxi \
        + q.P * geom.r * math.sin(q.theta)


def torque_virtual_work(geom: GripperGeometry, q: TorqueQuery, h: float = FD_STEP) -> float:
    """Canonical virtual-work torque T = -P * d(x_m + y_m)/dtheta in N*mm.

    The derivative runs by central finite difference through the full
    linkage solve, so it stays consistent with whatever branch the solver
    selects.
    """
    q.validate()
    x_lo, y_lo = driven_point(geom, solve_linkage(geom, q.theta - h))
    x_hi, y_hi = driven_point(geom, solve_linkage(geom, q.theta + h))
    return -q.P * ((x_hi - x_lo) + (y_hi - y_lo)) / (2.0 * h)


ContactSchedule = Callable[[float], float]


def linear_contact_schedule(theta_start: float = 0.2, theta_end: float = 1.0,
                            p_max: float = 1.0) -> ContactSchedule:
    """Default monotone closure schedule theta(P).

    Models the crank advancing linearly with the demanded grasp force as
    the fingers press in: theta(0) = theta_start, theta(p_max) = theta_end.
    Forces beyond p_max keep the final angle.
    """
    if theta_end <= theta_start:
        raise ValueError("theta_end must exceed theta_start")
    if p_max <= 0.0:
        raise ValueError("p_max must be > 0")

    def schedule(p: float) -> float:
        frac = min(max(p / p_max, 0.0), 1.0)
        return theta_start + (theta_end - theta_start) * frac

    return schedule


def force_torque_curve(geom: GripperGeometry, contact_map: ContactSchedule,
                       p_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Torque demand along a closure schedule: [(P, T)] with T from the
    virtual-work balance at theta = contact_map(P)."""
    if len(p_grid) == 0:
        raise ValueError("p_grid must not be empty")
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be strictly ascending")
    out = []
    for p in p_grid:
        theta = contact_map(p)
        out.append((p, torque_virtual_work(geom, TorqueQuery(theta=theta, P=p))))
    return out


def total_actuation_demand(single_finger_torque: float, fingers: int = 6,
                           efficiency: float = 0.8) -> float:
    """Scale one finger's torque demand to the full gripper.

    fingers * T / efficiency; the transmission efficiency models the
    non-ideal scaling of simultaneous multi-finger contact.
    """
    if fingers < 1:
        raise ValueError("fingers must be >= 1")
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("efficiency must be in (0, 1]")
    return fingers * single_finger_torque / efficiency


def torque_discrepancy_table(geom: GripperGeometry, thetas: Sequence[float],
                             p: float = 1.0) -> list[dict[str, float]]:
    """Sweep diagnostic comparing the two torque formulations.

    One row per feasible theta: both torques, their difference, and the
    effective closure angle gamma_eff = pi - beta - xi (which drifts with
    theta instead of staying at the nominal geometry gamma).  No equality
    is asserted; callers render or archive the table.
    """
    rows = []
    for theta in thetas:
        state = solve_linkage(geom, theta)
        x_m, y_m = driven_point(geom, state)
        t_vw = torque_virtual_work(geom, TorqueQuery(theta=theta, P=p))
        t_cf = torque_for_force(geom, TorqueQuery(theta=theta, P=p))
        rows.append({
            "theta_rad": theta,
            "beta_rad": state.beta,
            "xi_rad": state.xi,
            "k_mm": state.k,
            "x_m_mm": x_m,
            "y_m_mm": y_m,
            "gamma_eff_rad": state.gamma_eff,
            "T_vw_newton_mm": t_vw,
            "T_closed_form_newton_mm": t_cf,
            "discrepancy_newton_mm": t_cf - t_vw,
        })
    return rows


def geometry_with_range(geom: GripperGeometry, theta_min: float,
                        theta_max: float) -> GripperGeometry:
    """Copy of geom with a different declared crank range."""
    return replace(geom, theta_min=theta_min, theta_max=theta_max)
