"""Discrete PID grasp-force regulation and relay-free Ziegler-Nichols tuning.

The controller is positional PID in force units; its output (degrees) is
scaled, added to a configured base servo angle, and saturated to the servo
range.  The derivative term runs on the error through a first-order filter
because the sensing chain is noisy.  The integrator is clamped for
anti-windup.

The autotuner sweeps proportional gain with integral/derivative off until
the closed loop hunts in a sustained oscillation (>= 4 consecutive error
zero crossings whose per-period amplitudes do not decay, ratio >= 0.9, and
clear one ADC step), then applies the classic ultimate-gain rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import plant as plantmod
from .errors import NoOscillationFound
from .plant import (
    DEFAULT_CONTACT,
    DEFAULT_FSR,
    DEFAULT_SERVO,
    ContactModel,
    FsrModel,
    PlantState,
    ServoModel,
    TomatoSample,
    contact_force,
    fsr_read_mean,
)


@dataclass(frozen=True)
class PidGains:
    """kp in deg/N, ki in deg/(N*s), kd in deg*s/N (pre output scaling)."""

    kp: float
    ki: float
    kd: float

    def validate(self) -> None:
        if self.kp < 0.0 or self.ki < 0.0 or self.kd < 0.0:
            raise ValueError("PID gains must be >= 0")


#: gains reported for the physical rig; the acceptance suite runs them.
PAPER_GAINS = PidGains(kp=0.15, ki=0.02, kd=0.001)


@dataclass(frozen=True)
class ControlParams:
    """Output mapping and conditioning around the raw PID law."""

    base_angle: float = 96.0        # deg, command with zero PID output
    output_scale: float = 20000.0   # rig normalization, dimensionless
    integral_clamp: float = 0.05    # N*s anti-windup bound
    deriv_filter_alpha: float = 0.1  # first-order derivative filter
    settle_band: float = 0.02       # N, settle/steady-state band

    def validate(self) -> None:
        if self.output_scale <= 0.0:
            raise ValueError("output_scale must be > 0")
        if self.integral_clamp <= 0.0:
            raise ValueError("integral_clamp must be > 0")
        if not 0.0 < self.deriv_filter_alpha <= 1.0:
            raise ValueError("deriv_filter_alpha must be in (0, 1]")


DEFAULT_PARAMS = ControlParams()
DEFAULT_DT = 0.01  # s, control loop period


@dataclass(slots=True)
class ControllerState:
    """Value object; pid_step returns a fresh instance every period."""

    integral: float = 0.0
    prev_error: float | None = None
    prev_command: float = 0.0
    deriv: float = 0.0  # filtered error derivative, N/s


def pid_step(gains: PidGains, state: ControllerState, f_ref: float,
             f_meas: float, dt: float,
             params: ControlParams = DEFAULT_PARAMS,
             servo: ServoModel = DEFAULT_SERVO) -> tuple[float, ControllerState]:
    """One control period: returns (servo command in degrees, next state)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    error = f_ref - f_meas
    clamp = params.integral_clamp
    integral = min(max(state.integral + error * dt, -clamp), clamp)
    raw_deriv = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    deriv = state.deriv + params.deriv_filter_alpha * (raw_deriv - state.deriv)
    output = gains.kp * error + gains.ki * integral + gains.kd * deriv
    command = params.base_angle + params.output_scale * output
    command = min(max(command, servo.angle_min), servo.angle_max)
    return command, ControllerState(integral=integral, prev_error=error,
                                    prev_command=command, deriv=deriv)


@dataclass
class ForceTrace:
    """Uniformly sampled closed-loop record; time starts at dt."""

    dt: float
    time: np.ndarray
    f_ref: np.ndarray
    f_meas: np.ndarray
    f_true: np.ndarray
    command: np.ndarray
    servo_angle: np.ndarray

    def __len__(self) -> int:
        return len(self.time)

    def plateau(self, tail_fraction: float = 0.3) -> float:
        """Mean measured force over the trailing fraction of the trace."""
        start = int(len(self.f_meas) * (1.0 - tail_fraction))
        return float(self.f_meas[start:].mean())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("time_s,f_ref_N,f_meas_N,f_true_N,servo_deg\n")
            for i in range(len(self.time)):
                fh.write(f"{self.time[i]:.6g},{self.f_ref[i]:.9g},"
                         f"{self.f_meas[i]:.9g},{self.f_true[i]:.9g},"
                         f"{self.servo_angle[i]:.9g}\n")


@dataclass(frozen=True)
class ResponseMetrics:
    """settle_time is inf when the band is never held to the end."""

    settle_time: float
    overshoot: float
    steady_state_dev: float

    @property
    def settled(self) -> bool:
        return math.isfinite(self.settle_time)


def run_grasp(tomato: TomatoSample, gains: PidGains, f_ref: float,
              duration: float = 10.0, dt: float = DEFAULT_DT, seed: int = 0,
              servo: ServoModel = DEFAULT_SERVO, fsr: FsrModel = DEFAULT_FSR,
              contact: ContactModel = DEFAULT_CONTACT,
              params: ControlParams = DEFAULT_PARAMS,
              release_time: float | None = None,
              sensors: int = 3) -> ForceTrace:
    """Closed loop of plant.step + averaged FSR reads + pid_step.

    The servo starts parked at the base angle.  If release_time is given,
    the reference drops to zero from that time on, commanding a controlled
    release.  Bit-identical per (inputs, seed).
    """
    if duration <= 0.0 or dt <= 0.0:
        raise ValueError("duration and dt must be > 0")
    tomato.validate()
    gains.validate()
    params.validate()
    n = int(round(duration / dt))
    rng = np.random.default_rng(seed)
    # all sensor noise drawn up front (native floats keep the loop fast)
    if fsr.noise_sigma > 0.0:
        noise = rng.normal(0.0, fsr.noise_sigma, size=(n, sensors)).tolist()
    else:
        zero_row = (0.0,) * sensors
        noise = [zero_row] * n
    state = PlantState(servo_angle=params.base_angle,
                       true_force=contact_force(tomato, params.base_angle, contact),
                       time=0.0)
    ctrl = ControllerState()
    t = np.empty(n)
    ref_arr = np.empty(n)
    meas = np.empty(n)
    true = np.empty(n)
    cmd_arr = np.empty(n)
    angle = np.empty(n)
    for i in range(n):
        active_ref = f_ref
        if release_time is not None and state.time >= release_time:
            active_ref = 0.0
        measured = plantmod.mean_read_with_noise(fsr, state.true_force, noise[i])
        command, ctrl = pid_step(gains, ctrl, active_ref, measured, dt,
                                 params=params, servo=servo)
        state = plantmod.step(state, command, dt, servo=servo, tomato=tomato,
                              contact=contact)
        t[i] = state.time
        ref_arr[i] = active_ref
        meas[i] = measured
        true[i] = state.true_force
        cmd_arr[i] = command
        angle[i] = state.servo_angle
    return ForceTrace(dt=dt, time=t, f_ref=ref_arr, f_meas=meas, f_true=true,
                      command=cmd_arr, servo_angle=angle)


def response_metrics(trace: ForceTrace, band: float = 0.02,
                     tail_fraction: float = 0.3) -> ResponseMetrics:
    """Settle/overshoot/steady-state metrics against the trace reference.

    Assumes the reference is constant over the tail.  Settle time is the
    time of first entry into the +-band that is never left again; the
    marker value inf reports a trace that never held the band.
    """
    if len(trace) == 0:
        raise ValueError("trace must not be empty")
    ref = float(trace.f_ref[-1])
    err = np.abs(trace.f_meas - ref)
    in_band = err <= band
    settle = math.inf
    # walk backwards: longest suffix fully inside the band
    idx = len(in_band)
    while idx > 0 and in_band[idx - 1]:
        idx -= 1
    if idx < len(in_band):
        settle = idx * trace.dt
    overshoot = 0.0
    if ref > 0.0:
        overshoot = max(0.0, (float(trace.f_meas.max()) - ref) / ref)
    tail = trace.f_meas[int(len(trace) * (1.0 - tail_fraction)):]
    dev = float(np.abs(tail - ref).max())
    return ResponseMetrics(settle_time=settle, overshoot=overshoot,
                           steady_state_dev=dev)


def zn_gains_from_ultimate(ultimate_gain: float, period: float) -> PidGains:
    """Classic closed-loop rules: kp = 0.6*Ku, ki = 2*kp/Pu, kd = kp*Pu/8."""
    if ultimate_gain <= 0.0 or period <= 0.0:
        raise ValueError("ultimate gain and period must be > 0")
    kp = 0.6 * ultimate_gain
    return PidGains(kp=kp, ki=2.0 * kp / period, kd=kp * period / 8.0)


@dataclass(frozen=True)
class ZnTuning:
    gains: PidGains
    ultimate_gain: float
    oscillation_period: float


def _sustained_oscillation(trace: ForceTrace, f_ref: float, floor: float,
                           skip_fraction: float = 0.4,
                           min_ratio: float = 0.9) -> tuple[float, float] | None:
    """Detect sustained hunting in the error signal.

    Looks for any window of 4 consecutive zero crossings whose three
    half-cycle amplitudes all clear the floor and whose successive
    per-period amplitudes do not decay (ratio >= min_ratio).  Returns
    (mean amplitude, period) or None.
    """
    start = int(len(trace) * skip_fraction)
    err = f_ref - trace.f_meas[start:]
    times = trace.time[start:]
    signs = np.sign(err)
    signs[signs == 0] = 1
    crossings = np.where(np.diff(signs) != 0)[0]
    if len(crossings) < 4:
        return None
    half_amps = [float(np.abs(err[crossings[i]:crossings[i + 1] + 1]).max())
                 for i in range(len(crossings) - 1)]
    for i in range(len(crossings) - 3):
        a = half_amps[i:i + 3]
        if min(a) < floor:
            continue
        p1 = max(a[0], a[1])
        p2 = max(a[1], a[2])
        if p2 >= min_ratio * p1:
            span = float(times[crossings[i + 3]] - times[crossings[i]])
            return float(np.mean(a)), span * 2.0 / 3.0
    return None


def zn_autotune(tomato: TomatoSample, kp_grid, f_ref: float,
                duration: float = 8.0, dt: float = DEFAULT_DT, seed: int = 0,
                servo: ServoModel = DEFAULT_SERVO, fsr: FsrModel = DEFAULT_FSR,
                contact: ContactModel = DEFAULT_CONTACT,
                params: ControlParams = DEFAULT_PARAMS,
                amplitude_floor: float | None = None) -> ZnTuning:
    """Ultimate-gain sweep with integral and derivative off.

    kp_grid must be ascending; the first gain whose closed loop shows
    sustained oscillation defines Ku and the oscillation period Pu.  The
    amplitude floor defaults to one ADC step so pure sensor noise cannot
    masquerade as oscillation.  Raises NoOscillationFound when the sweep
    exhausts the grid.
    """
    kp_grid = list(kp_grid)
    if not kp_grid:
        raise ValueError("kp_grid must not be empty")
    if any(b <= a for a, b in zip(kp_grid, kp_grid[1:])):
        raise ValueError("kp_grid must be strictly ascending")
    floor = fsr.cal_gain if amplitude_floor is None else amplitude_floor
    for kp in kp_grid:
        trace = run_grasp(tomato, PidGains(kp=kp, ki=0.0, kd=0.0), f_ref,
                          duration=duration, dt=dt, seed=seed, servo=servo,
                          fsr=fsr, contact=contact, params=params)
        hit = _sustained_oscillation(trace, f_ref, floor)
        if hit is not None:
            _, period = hit
            return ZnTuning(gains=zn_gains_from_ultimate(kp, period),
                            ultimate_gain=kp, oscillation_period=period)
    raise NoOscillationFound(
        f"no sustained oscillation up to kp={kp_grid[-1]:g}")


#: default sweep used by the tune command
DEFAULT_KP_GRID = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2)
