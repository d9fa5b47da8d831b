"""Behavioral plant: tomato contact, gripper servo, and FSR sensing chain.

Everything here is a desk-scale stand-in for the measured behavior of the
real rig: a piecewise-linear contact spring engaged at a diameter-dependent
servo angle, a slew-limited first-order servo, and an FSR chain that
saturates, adds Gaussian noise, and round-trips through ADC quantization.
All randomness flows through caller-provided numpy Generators so runs are
reproducible per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81  # m/s^2


@dataclass(frozen=True)
class TomatoSample:
    """One fruit: mass in grams, diameter in mm, contact stiffness in N/mm."""

    id: str
    mass: float
    diameter: float
    stiffness: float
    friction_mu: float

    def validate(self) -> None:
        if self.mass <= 0.0:
            raise ValueError(f"{self.id}: mass must be > 0")
        if not 30.0 <= self.diameter <= 80.0:
            raise ValueError(f"{self.id}: diameter outside accepted 30..80 mm")
        if self.stiffness <= 0.0:
            raise ValueError(f"{self.id}: stiffness must be > 0")
        if not 0.0 < self.friction_mu < 2.0:
            raise ValueError(f"{self.id}: friction_mu outside (0, 2)")


#: measured sample table (masses/diameters of the five grasp-trial fruits);
#: stiffness and friction are simulation defaults.
DEFAULT_TOMATOES = {
    "F1": TomatoSample("F1", mass=81.0, diameter=57.0, stiffness=0.5, friction_mu=0.85),
    "F2": TomatoSample("F2", mass=72.0, diameter=54.0, stiffness=0.5, friction_mu=0.85),
    "F3": TomatoSample("F3", mass=76.0, diameter=55.0, stiffness=0.5, friction_mu=0.85),
    "F4": TomatoSample("F4", mass=50.0, diameter=48.0, stiffness=0.5, friction_mu=0.85),
    "F5": TomatoSample("F5", mass=40.0, diameter=43.0, stiffness=0.5, friction_mu=0.85),
}


@dataclass(frozen=True)
class ServoModel:
    """Gripper drive servo: range limits, slew rate, first-order lag."""

    angle_min: float = 0.0      # degrees
    angle_max: float = 180.0    # degrees
    max_rate: float = 6.0       # deg/s
    time_constant: float = 0.1  # s

    def validate(self) -> None:
        if not self.angle_min < self.angle_max:
            raise ValueError("servo angle_min must be < angle_max")
        if self.max_rate <= 0.0:
            raise ValueError("servo max_rate must be > 0")
        if self.time_constant <= 0.0:
            raise ValueError("servo time_constant must be > 0")


@dataclass(frozen=True)
class FsrModel:
    """FSR sensing chain: saturation, additive noise, ADC round trip."""

    force_max: float = 2.0            # N, sensor saturation
    adc_bits: int = 10
    noise_sigma: float = 0.001        # N
    cal_gain: float = 2.0 / 1023.0    # N per ADC count
    cal_offset: float = 0.0           # counts

    def validate(self) -> None:
        if self.force_max <= 0.0:
            raise ValueError("fsr force_max must be > 0")
        if self.adc_bits not in (8, 10, 12):
            raise ValueError("fsr adc_bits must be one of 8, 10, 12")
        if self.noise_sigma < 0.0:
            raise ValueError("fsr noise_sigma must be >= 0")
        if self.cal_gain <= 0.0:
            raise ValueError("fsr cal_gain must be > 0")


@dataclass(frozen=True)
class ContactModel:
    """Piecewise-linear contact law.

    Contact engages at engage_base - engage_slope*diameter (strictly
    decreasing in diameter, so a bigger fruit meets the fingers earlier).
    Beyond engagement the force is stiffness * deflection with deflection =
    deflection_per_deg * (angle - engagement), capped at force_cap.
    """

    engage_base: float = 115.0       # degrees at zero diameter
    engage_slope: float = 0.3        # degrees per mm of diameter
    deflection_per_deg: float = 0.1  # mm of squeeze per servo degree
    force_cap: float = 5.0           # N physical limit

    def validate(self) -> None:
        if self.engage_slope <= 0.0:
            raise ValueError("contact engage_slope must be > 0")
        if self.deflection_per_deg <= 0.0:
            raise ValueError("contact deflection_per_deg must be > 0")
        if self.force_cap <= 0.0:
            raise ValueError("contact force_cap must be > 0")

    def engagement_angle(self, diameter: float) -> float:
        return self.engage_base - self.engage_slope * diameter


DEFAULT_SERVO = ServoModel()
DEFAULT_FSR = FsrModel()
DEFAULT_CONTACT = ContactModel()


@dataclass(slots=True)
class PlantState:
    """Servo angle (deg), true contact force (N), and simulation time (s).

    Treated as a value: step() always returns a fresh instance.
    """

    servo_angle: float
    true_force: float
    time: float = 0.0


def contact_force(tomato: TomatoSample, servo_angle: float,
                  contact: ContactModel = DEFAULT_CONTACT) -> float:
    """True contact force in N at a servo angle (degrees)."""
    engage = contact.engagement_angle(tomato.diameter)
    deflection_deg = max(0.0, servo_angle - engage)
    force = tomato.stiffness * contact.deflection_per_deg * deflection_deg
    return min(force, contact.force_cap)


def _quantize(fsr: FsrModel, value: float) -> float:
    counts = round(value / fsr.cal_gain + fsr.cal_offset)
    max_counts = (1 << fsr.adc_bits) - 1
    counts = min(max(counts, 0), max_counts)
    return (counts - fsr.cal_offset) * fsr.cal_gain


def fsr_read(fsr: FsrModel, true_force: float, rng: np.random.Generator) -> float:
    """One sensor read: saturate, add noise, quantize through the ADC."""
    saturated = min(true_force, fsr.force_max)
    noisy = saturated + (rng.normal(0.0, fsr.noise_sigma) if fsr.noise_sigma > 0.0 else 0.0)
    return _quantize(fsr, noisy)


def mean_read_with_noise(fsr: FsrModel, true_force: float, noise) -> float:
    """Mean sensor reading given per-sensor noise samples (N each)."""
    saturated = min(true_force, fsr.force_max)
    total = 0.0
    for eps in noise:
        total += _quantize(fsr, saturated + eps)
    return total / len(noise)


def fsr_read_mean(fsr: FsrModel, true_force: float, rng: np.random.Generator,
                  sensors: int = 3) -> float:
    """Mean of the instrumented sensor strips reading the same true force.

    Equivalent to averaging independent fsr_read calls; the per-sensor
    noise is drawn as one vector to keep the control loop fast.
    """
    if fsr.noise_sigma > 0.0:
        noise = rng.normal(0.0, fsr.noise_sigma, size=sensors).tolist()
    else:
        noise = (0.0,) * sensors
    return mean_read_with_noise(fsr, true_force, noise)


def step(state: PlantState, command_angle: float, dt: float,
         servo: ServoModel = DEFAULT_SERVO,
         tomato: TomatoSample | None = None,
         contact: ContactModel = DEFAULT_CONTACT) -> PlantState:
    """Advance the plant one control period.

    The servo follows a first-order lag toward the command (exact
    discretization), slew-limited by max_rate and clamped to its range;
    the contact force is re-evaluated at the new angle.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    lag_gain = 1.0 - math.exp(-dt / servo.time_constant)
    delta = lag_gain * (command_angle - state.servo_angle)
    limit = servo.max_rate * dt
    delta = min(max(delta, -limit), limit)
    angle = min(max(state.servo_angle + delta, servo.angle_min), servo.angle_max)
    force = contact_force(tomato, angle, contact) if tomato is not None else 0.0
    return PlantState(servo_angle=angle, true_force=force, time=state.time + dt)


@dataclass(frozen=True)
class ReferencePolicy:
    """Mass-scaled grasp-force reference, clamped to the safe envelope."""

    coeff: float = 0.60   # fitted to the heavy/light plateau anchors
    floor: float = 0.20   # N
    ceiling: float = 0.50  # N


DEFAULT_REFERENCE = ReferencePolicy()


def reference_force(tomato: TomatoSample,
                    policy: ReferencePolicy = DEFAULT_REFERENCE) -> float:
    """Grasp-force reference in N for a fruit, scaled by weight."""
    raw = policy.coeff * (tomato.mass / 1000.0) * GRAVITY
    return min(max(raw, policy.floor), policy.ceiling)


def min_grasp_force(tomato: TomatoSample, n_contacts: int = 6,
                    safety: float = 1.0) -> float:
    """Anti-slip force floor: safety * weight / (friction * contacts)."""
    if n_contacts < 1:
        raise ValueError("n_contacts must be >= 1")
    if safety < 1.0:
        raise ValueError("safety must be >= 1")
    weight = (tomato.mass / 1000.0) * GRAVITY
    return safety * weight / (tomato.friction_mu * n_contacts)


def proximity_trigger(depth_offset: float, threshold: float) -> bool:
    """Infrared proximity stand-in: fires when the fruit sits within the
    depth threshold of the cutting region (mm, closed boundary)."""
    if threshold <= 0.0:
        raise ValueError("threshold must be > 0")
    return abs(depth_offset) <= threshold
