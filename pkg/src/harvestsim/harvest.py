"""Picking-cycle state machine with failure injection and campaign stats.

A trial walks the six stages in order (approach, separation, cutting,
grasping, departure, release).  Arm motions are checked with the cubic
planner, the cutting stage consults the perception stub's pedicel keypoint
against the cutter tolerance and depth window, and the grasping stage runs
the closed-loop force controller to record the peak contact force.

Failures are injected independently per mode with the calibrated
probabilities and realized mechanistically: an injected misalignment
perturbs the detected pedicel beyond the cutter tolerance, an injected
depth error pushes it outside the depth window, and an injected slip drops
the held force below the anti-slip floor at departure onset.  A trial
truncates at its failing stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import arm as armmod
from . import control as controlmod
from . import perception as percmod
from . import plant as plantmod
from .arm import DEFAULT_CHAIN, KinematicChain, plan_trajectory
from .control import PAPER_GAINS, ControlParams, PidGains, run_grasp
from .errors import ConfigInvalid, VelocityInfeasible
from .perception import NoiseModel, SceneObject, simulate_detections
from .plant import (
    DEFAULT_CONTACT,
    DEFAULT_FSR,
    DEFAULT_SERVO,
    TomatoSample,
    min_grasp_force,
    reference_force,
)


class HarvestStage(Enum):
    APPROACH = "approach"
    SEPARATION = "separation"
    CUTTING = "cutting"
    GRASPING = "grasping"
    DEPARTURE = "departure"
    RELEASE = "release"


STAGE_ORDER = (
    HarvestStage.APPROACH,
    HarvestStage.SEPARATION,
    HarvestStage.CUTTING,
    HarvestStage.GRASPING,
    HarvestStage.DEPARTURE,
    HarvestStage.RELEASE,
)


class FailureMode(Enum):
    PEDICEL_MISALIGNMENT = "pedicel_misalignment"
    KEYPOINT_DEPTH_ERROR = "keypoint_depth_error"
    TRANSFER_SLIP = "transfer_slip"

    @property
    def stage(self) -> HarvestStage:
        if self is FailureMode.TRANSFER_SLIP:
            return HarvestStage.DEPARTURE
        return HarvestStage.CUTTING


@dataclass(frozen=True)
class StageTimingModel:
    """Lognormal stage durations whose expected values are the stage means.

    sigma is the lognormal shape parameter; diameter_scale is a hook that
    stretches every stage mean by (1 + scale*(diameter-50)/50) and stays
    off (0.0) by default.
    """

    means: dict[HarvestStage, float] = field(default_factory=lambda: {
        HarvestStage.APPROACH: 6.0,
        HarvestStage.SEPARATION: 4.0,
        HarvestStage.CUTTING: 3.0,
        HarvestStage.GRASPING: 4.0,
        HarvestStage.DEPARTURE: 5.0,
        HarvestStage.RELEASE: 2.34,
    })
    sigma: float = 0.15
    total_cycle_mean: float = 24.34
    diameter_scale: float = 0.0

    def validate(self) -> None:
        for stage in STAGE_ORDER:
            if self.means.get(stage, 0.0) <= 0.0:
                raise ConfigInvalid(f"timing mean for {stage.value} must be > 0")
        if self.sigma < 0.0:
            raise ConfigInvalid("timing sigma must be >= 0")
        total = sum(self.means[s] for s in STAGE_ORDER)
        if abs(total - self.total_cycle_mean) > 1e-6:
            raise ConfigInvalid(
                f"stage means sum to {total:.4f}, expected "
                f"{self.total_cycle_mean:.4f}")

    def draw(self, stage: HarvestStage, rng: np.random.Generator,
             diameter: float | None = None) -> float:
        mean = self.means[stage]
        if diameter is not None and self.diameter_scale != 0.0:
            mean *= 1.0 + self.diameter_scale * (diameter - 50.0) / 50.0
        if self.sigma == 0.0:
            return mean
        mu = math.log(mean) - 0.5 * self.sigma ** 2
        return float(rng.lognormal(mu, self.sigma))


@dataclass(frozen=True)
class FailureRates:
    pedicel_misalignment: float = 0.0
    keypoint_depth_error: float = 0.0
    transfer_slip: float = 0.0

    def validate(self) -> None:
        for name in ("pedicel_misalignment", "keypoint_depth_error",
                     "transfer_slip"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigInvalid(f"failure rate {name} must be in [0, 1)")


def calibrate_failure_rates(target_success: float) -> float:
    """Equal per-mode probability p with (1-p)^3 = target_success."""
    if not 0.0 < target_success <= 1.0:
        raise ValueError("target_success must be in (0, 1]")
    return 1.0 - target_success ** (1.0 / 3.0)


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs; defaults give the calibrated nominal."""

    timing: StageTimingModel = field(default_factory=StageTimingModel)
    failure_rates: FailureRates = field(default_factory=lambda: FailureRates(
        pedicel_misalignment=calibrate_failure_rates(0.8),
        keypoint_depth_error=calibrate_failure_rates(0.8),
        transfer_slip=calibrate_failure_rates(0.8),
    ))
    cutting_tol: float = 5.0          # mm
    depth_window: float = 10.0        # mm
    keypoint_sigma: float = 1.0       # mm perception scatter during cutting
    gains: PidGains = PAPER_GAINS
    control_params: ControlParams = field(default_factory=ControlParams)
    servo: plantmod.ServoModel = DEFAULT_SERVO
    fsr: plantmod.FsrModel = DEFAULT_FSR
    contact: plantmod.ContactModel = DEFAULT_CONTACT
    reference: plantmod.ReferencePolicy = plantmod.DEFAULT_REFERENCE
    dt: float = controlmod.DEFAULT_DT
    n_contacts: int = 6
    safety: float = 1.0
    slip_force_factor: float = 0.1    # injected held-force deficit
    chain: KinematicChain = DEFAULT_CHAIN
    q_home: tuple[float, ...] = (0.0, -0.6, 1.0, 0.4, 0.0)
    q_pick: tuple[float, ...] = (0.5, 0.2, 0.6, -0.3, 0.2)
    velocity_limit: float = armmod.DEFAULT_VELOCITY_LIMIT
    pick_point: tuple[float, float, float] = (0.0, 300.0, 600.0)

    def validate(self) -> None:
        try:
            self.timing.validate()
            self.failure_rates.validate()
            self.gains.validate()
            self.control_params.validate()
            self.servo.validate()
            self.fsr.validate()
            self.contact.validate()
            self.chain.validate()
        except (ValueError, ConfigInvalid) as exc:
            raise ConfigInvalid(str(exc)) from exc
        if self.cutting_tol <= 0.0:
            raise ConfigInvalid("cutting_tol must be > 0")
        if self.depth_window <= 0.0:
            raise ConfigInvalid("depth_window must be > 0")
        if self.keypoint_sigma < 0.0:
            raise ConfigInvalid("keypoint_sigma must be >= 0")
        if self.dt <= 0.0:
            raise ConfigInvalid("dt must be > 0")
        if not 0.0 <= self.slip_force_factor < 1.0:
            raise ConfigInvalid("slip_force_factor must be in [0, 1)")
        for name in ("q_home", "q_pick"):
            q = np.asarray(getattr(self, name), dtype=float)
            if q.shape != (5,):
                raise ConfigInvalid(f"{name} must have 5 joints")
            if not self.chain.within_limits(q):
                raise ConfigInvalid(f"{name} violates joint limits")


@dataclass(frozen=True)
class TrialRecord:
    tomato_id: str
    success: bool
    failure_mode: FailureMode | None
    stage_durations: dict[HarvestStage, float]
    total_time: float
    peak_force: float

    @property
    def outcome(self) -> str:
        return "success" if self.success else f"fail:{self.failure_mode.value}"


def cutting_criterion(pedicel_kp, cutter_ref, tol: float) -> bool:
    """True iff the keypoint sits within tol of the cutter reference
    (closed boundary: distance exactly tol still cuts)."""
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    a = np.asarray(pedicel_kp, dtype=float)
    b = np.asarray(cutter_ref, dtype=float)
    return float(np.linalg.norm(a - b)) <= tol


def _fail(tomato: TomatoSample, mode: FailureMode,
          durations: dict[HarvestStage, float], peak: float) -> TrialRecord:
    return TrialRecord(tomato_id=tomato.id, success=False, failure_mode=mode,
                       stage_durations=dict(durations),
                       total_time=sum(durations.values()), peak_force=peak)


def run_trial(config: TrialConfig, tomato: TomatoSample,
              rng: np.random.Generator) -> TrialRecord:
    """One picking cycle; deterministic for a given generator state."""
    config.validate()
    try:
        tomato.validate()
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc

    rates = config.failure_rates
    inject_misalign = rng.random() < rates.pedicel_misalignment
    inject_depth = rng.random() < rates.keypoint_depth_error
    inject_slip = rng.random() < rates.transfer_slip

    durations: dict[HarvestStage, float] = {}

    def timed(stage: HarvestStage) -> float:
        d = config.timing.draw(stage, rng, diameter=tomato.diameter)
        durations[stage] = d
        return d

    # approach: motion feasibility via the cubic planner
    approach_t = timed(HarvestStage.APPROACH)
    try:
        plan_trajectory(config.chain, config.q_home, config.q_pick,
                        duration=approach_t,
                        velocity_limit=config.velocity_limit)
    except (VelocityInfeasible, ValueError) as exc:
        raise ConfigInvalid(f"approach motion infeasible: {exc}") from exc

    timed(HarvestStage.SEPARATION)

    # cutting: perception stub -> pedicel keypoint vs cutter tolerance
    timed(HarvestStage.CUTTING)
    radius = tomato.diameter / 2.0
    px, py, pz = config.pick_point
    target = SceneObject(
        center=(px, py, pz), radius=radius, ripeness=percmod.RIPE,
        occlusion_fraction=0.0,
        pedicel=(px, py + radius + 8.0, pz))
    dets = simulate_detections(
        [target], NoiseModel(keypoint_sigma=config.keypoint_sigma), rng)
    detected = np.asarray(dets[0].pedicel, dtype=float)
    true_pedicel = np.asarray(target.pedicel, dtype=float)
    if inject_misalign:
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        span = config.cutting_tol * (1.5 + abs(rng.normal()))
        detected[0] = true_pedicel[0] + span * direction[0]
        detected[1] = true_pedicel[1] + span * direction[1]
    if inject_depth:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        detected[2] = true_pedicel[2] + sign * config.depth_window * (
            1.5 + abs(rng.normal()))
    in_plane_det = np.array([detected[0], detected[1], 0.0])
    in_plane_ref = np.array([true_pedicel[0], true_pedicel[1], 0.0])
    if not cutting_criterion(in_plane_det, in_plane_ref, config.cutting_tol):
        return _fail(tomato, FailureMode.PEDICEL_MISALIGNMENT, durations, 0.0)
    if not plantmod.proximity_trigger(detected[2] - true_pedicel[2],
                                      config.depth_window):
        return _fail(tomato, FailureMode.KEYPOINT_DEPTH_ERROR, durations, 0.0)

    # grasping: closed-loop force regulation, record the true peak
    grasp_t = timed(HarvestStage.GRASPING)
    f_ref = reference_force(tomato, config.reference)
    grasp_seed = int(rng.integers(0, 2 ** 32))
    trace = run_grasp(tomato, config.gains, f_ref, duration=grasp_t,
                      dt=config.dt, seed=grasp_seed, servo=config.servo,
                      fsr=config.fsr, contact=config.contact,
                      params=config.control_params)
    peak = float(trace.f_true.max())
    held = float(trace.f_true[-1])

    # departure: return motion + slip check at motion onset
    departure_t = timed(HarvestStage.DEPARTURE)
    try:
        plan_trajectory(config.chain, config.q_pick, config.q_home,
                        duration=departure_t,
                        velocity_limit=config.velocity_limit)
    except (VelocityInfeasible, ValueError) as exc:
        raise ConfigInvalid(f"departure motion infeasible: {exc}") from exc
    if inject_slip:
        held *= config.slip_force_factor
    if held < min_grasp_force(tomato, config.n_contacts, config.safety):
        return _fail(tomato, FailureMode.TRANSFER_SLIP, durations, peak)

    timed(HarvestStage.RELEASE)
    return TrialRecord(tomato_id=tomato.id, success=True, failure_mode=None,
                       stage_durations=dict(durations),
                       total_time=sum(durations.values()), peak_force=peak)


@dataclass(frozen=True)
class CampaignSummary:
    n_trials: int
    success_rate: float
    mean_cycle_time: float              # over successful trials; nan if none
    stage_means: dict[str, float]       # over successful trials
    failure_histogram: dict[str, int]
    peak_force_min: float
    peak_force_max: float

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "success_rate": self.success_rate,
            "mean_cycle_time_s": self.mean_cycle_time,
            "stage_means_s": dict(sorted(self.stage_means.items())),
            "failure_histogram": dict(sorted(self.failure_histogram.items())),
            "peak_force_min_N": self.peak_force_min,
            "peak_force_max_N": self.peak_force_max,
        }


def trial_seed(base_seed: int, index: int) -> int:
    """Per-trial seed: base_seed XOR trial index (order independent)."""
    return base_seed ^ index


def run_trials(n: int, config: TrialConfig, base_seed: int,
               tomatoes: list[TomatoSample] | None = None) -> list[TrialRecord]:
    """n independent trials, round-robin over the sample table."""
    if n < 1:
        raise ValueError("n must be >= 1")
    config.validate()
    table = tomatoes if tomatoes is not None else list(
        plantmod.DEFAULT_TOMATOES.values())
    records = []
    for i in range(n):
        rng = np.random.default_rng(trial_seed(base_seed, i))
        records.append(run_trial(config, table[i % len(table)], rng))
    return records


def summarize(records: list[TrialRecord]) -> CampaignSummary:
    """Order-independent aggregation of trial records."""
    if not records:
        raise ValueError("records must not be empty")
    successes = [r for r in records if r.success]
    histogram = {mode.value: 0 for mode in FailureMode}
    for r in records:
        if not r.success:
            histogram[r.failure_mode.value] += 1
    stage_means: dict[str, float] = {}
    if successes:
        # math.fsum is exactly rounded, so aggregates do not depend on
        # the order the trials are presented in
        for stage in STAGE_ORDER:
            stage_means[stage.value] = math.fsum(
                r.stage_durations[stage] for r in successes) / len(successes)
        mean_cycle = math.fsum(r.total_time for r in successes) / len(successes)
        peaks = [r.peak_force for r in successes]
        peak_min, peak_max = float(min(peaks)), float(max(peaks))
    else:
        mean_cycle = float("nan")
        peak_min = peak_max = float("nan")
    return CampaignSummary(
        n_trials=len(records),
        success_rate=len(successes) / len(records),
        mean_cycle_time=mean_cycle,
        stage_means=stage_means,
        failure_histogram=histogram,
        peak_force_min=peak_min,
        peak_force_max=peak_max)


def run_campaign(n: int, config: TrialConfig, base_seed: int,
                 tomatoes: list[TomatoSample] | None = None) -> CampaignSummary:
    """Monte Carlo campaign over n independent, per-seeded trials."""
    return summarize(run_trials(n, config, base_seed, tomatoes))


def stage_report(records: list[TrialRecord]) -> list[dict]:
    """Per-stage duration table over successful trials, CSV-ready rows.

    Returns an empty list when no trial succeeded; writers emit an explicit
    marker row in that case.
    """
    if not records:
        raise ValueError("records must not be empty")
    successes = [r for r in records if r.success]
    if not successes:
        return []
    rows = []
    for stage in STAGE_ORDER:
        values = [r.stage_durations[stage] for r in successes]
        rows.append({
            "stage": stage.value,
            "mean_s": math.fsum(values) / len(values),
            "min_s": float(np.min(values)),
            "max_s": float(np.max(values)),
            "count": len(values),
        })
    return rows
