"""Tomato contact law, FSR chain, servo stepping, reference policies."""

import math

import numpy as np
import pytest

from harvestsim.plant import (
    DEFAULT_CONTACT,
    DEFAULT_TOMATOES,
    FsrModel,
    PlantState,
    ServoModel,
    TomatoSample,
    contact_force,
    fsr_read,
    fsr_read_mean,
    min_grasp_force,
    proximity_trigger,
    reference_force,
    step,
)

F1 = DEFAULT_TOMATOES["F1"]
F3 = DEFAULT_TOMATOES["F3"]
F5 = DEFAULT_TOMATOES["F5"]


class TestContactForce:
    def test_zero_below_engagement(self):
        engage = DEFAULT_CONTACT.engagement_angle(F3.diameter)
        assert contact_force(F3, engage - 5.0) == 0.0
        assert contact_force(F3, engage) == 0.0

    def test_monotone_in_angle(self):
        angles = np.linspace(0.0, 180.0, 181)
        forces = [contact_force(F3, a) for a in angles]
        assert all(b >= a for a, b in zip(forces, forces[1:]))
        assert min(forces) >= 0.0

    def test_larger_diameter_larger_force(self):
        small = TomatoSample("s", 50.0, 45.0, 0.5, 0.9)
        large = TomatoSample("l", 80.0, 60.0, 0.5, 0.9)
        angle = DEFAULT_CONTACT.engagement_angle(45.0) + 5.0
        assert contact_force(large, angle) > contact_force(small, angle)

    def test_f1_positive_at_f5_engagement(self):
        f5_engage = DEFAULT_CONTACT.engagement_angle(F5.diameter)
        assert contact_force(F1, f5_engage) > 0.0

    def test_cap(self):
        assert contact_force(F3, 180.0) <= DEFAULT_CONTACT.force_cap


class TestFsr:
    def test_zero_force_reads_within_one_step(self):
        fsr = FsrModel(noise_sigma=0.0)
        reading = fsr_read(fsr, 0.0, np.random.default_rng(0))
        assert abs(reading) <= fsr.cal_gain

    def test_saturation(self):
        fsr = FsrModel(noise_sigma=0.0)
        reading = fsr_read(fsr, 5.0, np.random.default_rng(0))
        assert reading == pytest.approx(2.0, abs=1e-9)

    def test_mean_converges_at_fixed_seed(self):
        fsr = FsrModel(noise_sigma=0.01)
        rng = np.random.default_rng(42)
        readings = [fsr_read(fsr, 0.3, rng) for _ in range(10_000)]
        assert abs(np.mean(readings) - 0.3) < 0.002

    def test_bounded_with_high_probability(self):
        fsr = FsrModel(noise_sigma=0.01)
        rng = np.random.default_rng(3)
        lo = -3.0 * fsr.noise_sigma
        hi = fsr.force_max + 3.0 * fsr.noise_sigma
        n = 100_000
        inside = sum(lo <= fsr_read(fsr, 1.0, rng) <= hi for _ in range(n))
        assert inside / n >= 0.997

    def test_mean_read_matches_single_read_scale(self):
        fsr = FsrModel(noise_sigma=0.0)
        rng = np.random.default_rng(0)
        assert fsr_read_mean(fsr, 0.7, rng) == pytest.approx(
            fsr_read(fsr, 0.7, rng), abs=fsr.cal_gain)

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            FsrModel(adc_bits=9).validate()


class TestServoStep:
    def test_fixed_point(self):
        state = PlantState(servo_angle=100.0, true_force=0.0, time=1.0)
        nxt = step(state, 100.0, 0.01, tomato=F3)
        assert nxt.servo_angle == 100.0
        assert nxt.time == pytest.approx(1.01)

    def test_slew_bound(self):
        servo = ServoModel(max_rate=6.0)
        state = PlantState(servo_angle=10.0, true_force=0.0)
        for _ in range(200):
            nxt = step(state, 180.0, 0.01, servo=servo, tomato=F3)
            assert abs(nxt.servo_angle - state.servo_angle) <= 6.0 * 0.01 + 1e-12
            state = nxt

    def test_first_order_convergence_five_time_constants(self):
        # huge rate removes the slew limit: pure first-order lag
        servo = ServoModel(max_rate=1e9, time_constant=0.2)
        state = PlantState(servo_angle=90.0, true_force=0.0)
        target = 120.0
        steps = int(5.0 * servo.time_constant / 0.01)
        for _ in range(steps):
            state = step(state, target, 0.01, servo=servo, tomato=F3)
        assert abs(state.servo_angle - target) <= 0.01 * abs(target - 90.0)

    def test_range_clamp(self):
        servo = ServoModel(angle_min=0.0, angle_max=180.0, max_rate=1e9)
        state = PlantState(servo_angle=179.0, true_force=0.0)
        for _ in range(100):
            state = step(state, 500.0, 0.01, servo=servo, tomato=F3)
        assert state.servo_angle <= 180.0

    def test_determinism(self):
        s0 = PlantState(servo_angle=96.0, true_force=0.0)
        a = step(s0, 140.0, 0.01, tomato=F3)
        b = step(PlantState(servo_angle=96.0, true_force=0.0), 140.0, 0.01,
                 tomato=F3)
        assert a == b

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            step(PlantState(90.0, 0.0), 90.0, 0.0, tomato=F3)


class TestReferenceForce:
    def test_heavy_sample_anchor(self):
        # 0.60 * 0.081 kg * 9.81 = 0.4768 N
        assert reference_force(F1) == pytest.approx(0.476766, abs=1e-6)

    def test_light_sample_anchor(self):
        # 0.60 * 0.040 kg * 9.81 = 0.2354 N
        assert reference_force(F5) == pytest.approx(0.23544, abs=1e-6)

    def test_clamps(self):
        tiny = TomatoSample("t", 1.0, 35.0, 0.5, 0.9)
        assert reference_force(tiny) == 0.20
        huge = TomatoSample("h", 500.0, 75.0, 0.5, 0.9)
        assert reference_force(huge) == 0.50

    def test_envelope_for_all_defaults(self):
        for tomato in DEFAULT_TOMATOES.values():
            assert 0.20 <= reference_force(tomato) <= 0.50


class TestMinGraspForce:
    def test_reference_arithmetic(self):
        # 0.040 kg * 9.81 / (0.8 * 6) = 0.08175 N
        tomato = TomatoSample("F5x", 40.0, 43.0, 0.5, 0.8)
        assert min_grasp_force(tomato, 6, 1.0) == pytest.approx(0.08175, abs=1e-6)

    def test_linear_in_safety(self):
        assert min_grasp_force(F5, 6, 2.0) == pytest.approx(
            2.0 * min_grasp_force(F5, 6, 1.0))

    def test_decreasing_in_friction(self):
        slippery = TomatoSample("s", 40.0, 43.0, 0.5, 0.3)
        grippy = TomatoSample("g", 40.0, 43.0, 0.5, 1.9)
        assert min_grasp_force(grippy) < min_grasp_force(slippery)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            min_grasp_force(F5, 0, 1.0)
        with pytest.raises(ValueError):
            min_grasp_force(F5, 6, 0.5)


class TestProximityTrigger:
    def test_inside_and_boundary(self):
        assert proximity_trigger(0.0, 10.0)
        assert proximity_trigger(-10.0, 10.0)
        assert proximity_trigger(10.0, 10.0)

    def test_outside(self):
        assert not proximity_trigger(10.5, 10.0)

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            proximity_trigger(1.0, 0.0)


class TestTomatoValidation:
    def test_accepts_defaults(self):
        for tomato in DEFAULT_TOMATOES.values():
            tomato.validate()

    @pytest.mark.parametrize("kwargs", [
        dict(mass=0.0), dict(diameter=20.0), dict(diameter=90.0),
        dict(stiffness=0.0), dict(friction_mu=0.0), dict(friction_mu=2.5),
    ])
    def test_rejects_bad_fields(self, kwargs):
        base = dict(id="x", mass=50.0, diameter=50.0, stiffness=0.5,
                    friction_mu=0.9)
        base.update(kwargs)
        with pytest.raises(ValueError):
            TomatoSample(**base).validate()
