"""Picking-cycle trials, failure injection, campaign statistics."""

import dataclasses
import math
import random

import numpy as np
import pytest

from harvestsim.errors import ConfigInvalid
from harvestsim.harvest import (
    STAGE_ORDER,
    CampaignSummary,
    FailureMode,
    FailureRates,
    HarvestStage,
    StageTimingModel,
    TrialConfig,
    calibrate_failure_rates,
    cutting_criterion,
    run_campaign,
    run_trial,
    run_trials,
    stage_report,
    summarize,
    trial_seed,
)
from harvestsim.plant import DEFAULT_TOMATOES, ReferencePolicy

F1 = DEFAULT_TOMATOES["F1"]
F3 = DEFAULT_TOMATOES["F3"]

CLEAN = TrialConfig(failure_rates=FailureRates(0.0, 0.0, 0.0),
                    keypoint_sigma=0.0)
NEAR_ONE = 1.0 - 1e-12


def force_mode(**kwargs):
    rates = FailureRates(**{**dict(pedicel_misalignment=0.0,
                                   keypoint_depth_error=0.0,
                                   transfer_slip=0.0), **kwargs})
    return dataclasses.replace(CLEAN, failure_rates=rates)


class TestCuttingCriterion:
    def test_coincident(self):
        assert cutting_criterion((1.0, 2.0, 3.0), (1.0, 2.0, 3.0), tol=5.0)

    def test_closed_boundary(self):
        assert cutting_criterion((5.0, 0.0, 0.0), (0.0, 0.0, 0.0), tol=5.0)

    def test_three_four_five_outside(self):
        assert not cutting_criterion((3.0, 4.0, 0.0), (0.0, 0.0, 0.0), tol=4.0)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            cutting_criterion((0, 0, 0), (0, 0, 0), tol=0.0)


class TestCalibration:
    def test_perfect_target(self):
        assert calibrate_failure_rates(1.0) == 0.0

    def test_point_eight(self):
        p = calibrate_failure_rates(0.8)
        assert p == pytest.approx(0.07168, abs=5e-6)
        assert (1.0 - p) ** 3 == pytest.approx(0.8, rel=1e-12)

    def test_cube_identity(self):
        assert calibrate_failure_rates(0.512) == pytest.approx(0.2, rel=1e-9)

    def test_rejects_bad_target(self):
        with pytest.raises(ValueError):
            calibrate_failure_rates(0.0)


class TestStageTimingModel:
    def test_means_must_sum_to_cycle_mean(self):
        model = StageTimingModel()
        model.validate()
        bad = StageTimingModel(total_cycle_mean=30.0)
        with pytest.raises(ConfigInvalid):
            bad.validate()

    def test_lognormal_mean_matches_stage_mean(self):
        model = StageTimingModel()
        rng = np.random.default_rng(3)
        draws = [model.draw(HarvestStage.APPROACH, rng) for _ in range(40_000)]
        assert np.mean(draws) == pytest.approx(6.0, rel=0.005)

    def test_zero_sigma_is_deterministic(self):
        model = StageTimingModel(sigma=0.0)
        rng = np.random.default_rng(0)
        assert model.draw(HarvestStage.RELEASE, rng) == 2.34

    def test_diameter_hook_off_by_default(self):
        model = StageTimingModel(sigma=0.0)
        rng = np.random.default_rng(0)
        assert model.draw(HarvestStage.APPROACH, rng, diameter=80.0) == 6.0
        scaled = StageTimingModel(sigma=0.0, diameter_scale=0.5)
        assert scaled.draw(HarvestStage.APPROACH, rng, diameter=80.0) \
            == pytest.approx(6.0 * 1.3)


class TestRunTrial:
    def test_clean_trial_succeeds_with_all_stages(self):
        record = run_trial(CLEAN, F3, np.random.default_rng(1))
        assert record.success
        assert record.failure_mode is None
        assert set(record.stage_durations) == set(STAGE_ORDER)
        assert record.total_time == sum(record.stage_durations.values())
        assert record.peak_force > 0.0

    def test_forced_pedicel_misalignment(self):
        config = force_mode(pedicel_misalignment=NEAR_ONE)
        record = run_trial(config, F3, np.random.default_rng(2))
        assert not record.success
        assert record.failure_mode is FailureMode.PEDICEL_MISALIGNMENT
        executed = set(record.stage_durations)
        assert executed == {HarvestStage.APPROACH, HarvestStage.SEPARATION,
                            HarvestStage.CUTTING}

    def test_forced_depth_error(self):
        config = force_mode(keypoint_depth_error=NEAR_ONE)
        record = run_trial(config, F3, np.random.default_rng(3))
        assert record.failure_mode is FailureMode.KEYPOINT_DEPTH_ERROR
        assert HarvestStage.GRASPING not in record.stage_durations

    def test_forced_transfer_slip(self):
        config = force_mode(transfer_slip=NEAR_ONE)
        record = run_trial(config, F3, np.random.default_rng(4))
        assert record.failure_mode is FailureMode.TRANSFER_SLIP
        executed = set(record.stage_durations)
        assert HarvestStage.DEPARTURE in executed
        assert HarvestStage.RELEASE not in executed
        assert record.peak_force > 0.0  # grasp ran before the slip

    def test_reference_below_slip_floor_slips(self):
        # a reference force below the anti-slip floor must lose the fruit
        weak = dataclasses.replace(
            CLEAN, reference=ReferencePolicy(coeff=0.01, floor=0.01,
                                             ceiling=0.02))
        record = run_trial(weak, F1, np.random.default_rng(5))
        assert not record.success
        assert record.failure_mode is FailureMode.TRANSFER_SLIP

    def test_failure_mode_stage_binding(self):
        assert FailureMode.PEDICEL_MISALIGNMENT.stage is HarvestStage.CUTTING
        assert FailureMode.KEYPOINT_DEPTH_ERROR.stage is HarvestStage.CUTTING
        assert FailureMode.TRANSFER_SLIP.stage is HarvestStage.DEPARTURE

    def test_invalid_config_raises(self):
        bad = dataclasses.replace(CLEAN, cutting_tol=-1.0)
        with pytest.raises(ConfigInvalid):
            run_trial(bad, F3, np.random.default_rng(0))

    def test_deterministic_per_seed(self):
        a = run_trial(TrialConfig(), F3, np.random.default_rng(99))
        b = run_trial(TrialConfig(), F3, np.random.default_rng(99))
        assert a == b


class TestCampaign:
    def test_trial_seed_xor(self):
        assert trial_seed(12, 5) == 12 ^ 5

    def test_success_rate_near_calibrated_target(self):
        summary = run_campaign(2000, TrialConfig(), base_seed=11)
        assert 0.77 <= summary.success_rate <= 0.83
        assert summary.mean_cycle_time == pytest.approx(24.34, abs=0.5)

    def test_peak_forces_inside_envelope(self):
        summary = run_campaign(500, TrialConfig(), base_seed=21)
        assert summary.peak_force_min >= 0.20
        assert summary.peak_force_max <= 0.50

    def test_aggregates_order_independent(self):
        records = run_trials(300, TrialConfig(), base_seed=5)
        shuffled = records.copy()
        random.Random(0).shuffle(shuffled)
        assert summarize(records) == summarize(shuffled)

    def test_records_reproducible(self):
        a = run_trials(100, TrialConfig(), base_seed=8)
        b = run_trials(100, TrialConfig(), base_seed=8)
        assert a == b

    def test_per_trial_seeding_is_order_free(self):
        config = TrialConfig()
        batch = run_trials(20, config, base_seed=77)
        table = list(DEFAULT_TOMATOES.values())
        for i in reversed(range(20)):
            rng = np.random.default_rng(trial_seed(77, i))
            assert run_trial(config, table[i % 5], rng) == batch[i]

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            run_trials(0, TrialConfig(), 0)
        with pytest.raises(ValueError):
            summarize([])


class TestStageReport:
    def test_single_success_means_equal_record(self):
        records = [run_trial(CLEAN, F3, np.random.default_rng(1))]
        rows = stage_report(records)
        assert len(rows) == 6
        for row in rows:
            stage = HarvestStage(row["stage"])
            assert row["mean_s"] == records[0].stage_durations[stage]
            assert row["count"] == 1

    def test_all_failures_empty_marker(self):
        config = force_mode(pedicel_misalignment=NEAR_ONE)
        records = [run_trial(config, F3, np.random.default_rng(i))
                   for i in range(5)]
        assert stage_report(records) == []

    def test_means_converge_to_timing_model(self):
        records = run_trials(3000, CLEAN, base_seed=3)
        rows = {r["stage"]: r for r in stage_report(records)}
        model = StageTimingModel()
        for stage in STAGE_ORDER:
            assert rows[stage.value]["mean_s"] == pytest.approx(
                model.means[stage], rel=0.05)
