"""Config parsing/validation, manifests, and the CLI surface."""

import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from harvestsim.cli import main
from harvestsim.config import RunConfig, RunManifest
from harvestsim.errors import ConfigInvalid


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def default_yaml(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(RunConfig.default().to_yaml())
    return path


def read_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestRunConfig:
    def test_default_validates(self):
        cfg = RunConfig.default()
        cfg.validate()

    def test_yaml_round_trip_preserves_hash(self, tmp_path):
        cfg = RunConfig.default()
        path = tmp_path / "cfg.yaml"
        path.write_text(cfg.to_yaml())
        again = RunConfig.from_yaml(path)
        assert again.hash() == cfg.hash()

    def test_seed_changes_hash(self):
        a = RunConfig.default()
        b = RunConfig.default()
        b.seed = 123
        assert a.hash() != b.hash()

    def test_missing_section_named(self):
        data = RunConfig.default().to_dict()
        del data["perception"]
        with pytest.raises(ConfigInvalid, match="perception"):
            RunConfig.from_dict(data)

    def test_unknown_key_rejected(self):
        data = RunConfig.default().to_dict()
        data["geometry"]["bogus_mm"] = 1.0
        with pytest.raises(ConfigInvalid, match="bogus_mm"):
            RunConfig.from_dict(data)

    def test_section_invariants_enforced(self):
        data = RunConfig.default().to_dict()
        data["plant"]["fsr"]["adc_bits"] = 9
        with pytest.raises(ConfigInvalid, match="fsr"):
            RunConfig.from_dict(data)

    def test_geometry_feasibility_enforced(self):
        data = RunConfig.default().to_dict()
        data["geometry"]["d_mm"] = 200.0
        with pytest.raises(ConfigInvalid, match="geometry"):
            RunConfig.from_dict(data)

    def test_timing_sum_enforced(self):
        data = RunConfig.default().to_dict()
        data["harvest"]["timing"]["approach_s"] = 10.0
        with pytest.raises(ConfigInvalid, match="harvest"):
            RunConfig.from_dict(data)


class TestManifest:
    def test_round_trip_fields(self, tmp_path):
        cfg = RunConfig.default()
        manifest = RunManifest.for_run(cfg, "grasp", ["a.csv", "a.png"])
        path = tmp_path / "m.json"
        manifest.write(path)
        data = json.loads(path.read_text())
        assert data["config_sha256"] == cfg.hash()
        assert data["command"] == "grasp"
        assert data["outputs"] == ["a.csv", "a.png"]


class TestMechCommands:
    def test_torque_curve_output(self, runner, tmp_path):
        out = tmp_path / "curve.csv"
        result = runner.invoke(main, [
            "mech", "torque-curve", "--out", str(out), "--points", "21",
            "--fingers", "6", "--eta", "0.8"])
        assert result.exit_code == 0, result.output
        header, rows = read_csv(out)
        assert header == ["P_newton", "T_newton_mm", "T_demand_newton_mm"]
        assert len(rows) == 21
        torques = [float(r[1]) for r in rows]
        assert all(b > a for a, b in zip(torques, torques[1:]))
        for r in rows:
            # columns are independently rounded to 9 significant digits
            assert float(r[2]) == pytest.approx(6.0 / 0.8 * float(r[1]),
                                                rel=1e-6)
        assert out.with_suffix(".png").exists()
        manifest = json.loads(
            out.with_suffix(".csv.manifest.json").read_text())
        assert out.name in manifest["outputs"]

    def test_torque_curve_rejects_empty_grid(self, runner, tmp_path):
        result = runner.invoke(main, [
            "mech", "torque-curve", "--out", str(tmp_path / "c.csv"),
            "--points", "0"])
        assert result.exit_code == 2
        assert not (tmp_path / "c.csv").exists()

    def test_sweep_emits_discrepancy_table(self, runner, tmp_path):
        out = tmp_path / "sweep.csv"
        result = runner.invoke(main, [
            "mech", "sweep", "--out", str(out), "--points", "50",
            "--no-plot"])
        assert result.exit_code == 0, result.output
        header, rows = read_csv(out)
        assert "discrepancy_newton_mm" in header
        assert "gamma_eff_rad" in header
        assert len(rows) == 50

    def test_infeasible_geometry_domain_exit(self, runner, tmp_path):
        data = RunConfig.default().to_dict()
        data["geometry"]["theta_max_deg"] = 68.75493541569878
        data["geometry"]["d_mm"] = 46.2  # infeasible near the top of range
        cfg_path = tmp_path / "bad.yaml"
        cfg_path.write_text(yaml.safe_dump(data))
        result = runner.invoke(main, [
            "mech", "sweep", "--out", str(tmp_path / "s.csv"),
            "--config", str(cfg_path)])
        assert result.exit_code in (2, 3)
        assert not (tmp_path / "s.csv").exists()


class TestGraspCommand:
    def test_auto_reference_plateau_f1(self, runner, tmp_path):
        out = tmp_path / "trace.csv"
        result = runner.invoke(main, [
            "grasp", "--tomato", "F1", "--ref", "auto", "--duration", "8",
            "--seed", "3", "--out", str(out), "--no-plot"])
        assert result.exit_code == 0, result.output
        header, rows = read_csv(out)
        assert header == ["time_s", "f_ref_N", "f_meas_N", "f_true_N",
                          "servo_deg"]
        tail = [float(r[2]) for r in rows[int(0.7 * len(rows)):]]
        plateau = sum(tail) / len(tail)
        assert 0.45 <= plateau <= 0.52

    def test_gains_override_and_custom_tomato(self, runner, tmp_path):
        out = tmp_path / "trace.csv"
        result = runner.invoke(main, [
            "grasp", "--tomato", "custom", "--custom", "60,50,0.5,0.9",
            "--ref", "0.3", "--gains", "0.15,0.02,0.001", "--duration", "6",
            "--seed", "1", "--out", str(out), "--no-plot"])
        assert result.exit_code == 0, result.output

    def test_unknown_tomato_exit(self, runner, tmp_path):
        result = runner.invoke(main, [
            "grasp", "--tomato", "F9", "--seed", "1",
            "--out", str(tmp_path / "t.csv")])
        assert result.exit_code == 2

    def test_seed_required(self, runner, tmp_path):
        result = runner.invoke(main, [
            "grasp", "--out", str(tmp_path / "t.csv")])
        assert result.exit_code != 0


class TestTuneCommand:
    def test_writes_gains_json(self, runner, tmp_path):
        out = tmp_path / "gains.json"
        result = runner.invoke(main, [
            "tune", "--tomato", "F3", "--ref", "0.3", "--seed", "0",
            "--out", str(out)])
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert data["kp"] == pytest.approx(0.6 * data["ultimate_gain"])
        assert data["ki"] > 0.0

    def test_no_oscillation_domain_exit(self, runner, tmp_path):
        result = runner.invoke(main, [
            "tune", "--tomato", "custom", "--custom", "76,55,0.02,0.85",
            "--ref", "0.3", "--kp-grid", "0.01,0.02", "--seed", "0",
            "--out", str(tmp_path / "g.json")])
        assert result.exit_code == 3
        assert not (tmp_path / "g.json").exists()


class TestPlanCommand:
    def test_reachable_target_writes_trajectory(self, runner, tmp_path):
        out = tmp_path / "traj.csv"
        result = runner.invoke(main, [
            "plan", "--target", "300,200,400", "--seed", "5",
            "--duration", "4", "--out", str(out), "--no-plot"])
        assert result.exit_code == 0, result.output
        header, rows = read_csv(out)
        assert header == ["t_s", "q1_rad", "q2_rad", "q3_rad", "q4_rad",
                          "q5_rad"]
        assert len(rows) > 100

    def test_unreachable_target_domain_exit(self, runner, tmp_path):
        result = runner.invoke(main, [
            "plan", "--target", "5000,0,0", "--seed", "5",
            "--out", str(tmp_path / "t.csv")])
        assert result.exit_code == 3


class TestPerceptionCommand:
    def test_eval_metrics_and_scene_export(self, runner, tmp_path):
        out = tmp_path / "metrics.json"
        scenes = tmp_path / "scenes.json"
        result = runner.invoke(main, [
            "perception", "eval", "--scenes", "10", "--objects", "5",
            "--noise", "1.0,0.1,0.5,0.05", "--seed", "9",
            "--out", str(out), "--export-scenes", str(scenes)])
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert 0.0 <= data["precision"] <= 1.0
        assert 0.0 <= data["recall"] <= 1.0
        assert 0.0 <= data["mask_ap"] <= 1.0
        assert data["keypoint_errors"]["n_pairs"] > 0
        from harvestsim.perception import scenes_from_json
        loaded = scenes_from_json(scenes.read_text())
        assert len(loaded) == 10

    def test_zero_noise_perfect(self, runner, tmp_path):
        out = tmp_path / "metrics.json"
        result = runner.invoke(main, [
            "perception", "eval", "--scenes", "5", "--objects", "4",
            "--seed", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert data["precision"] == 1.0
        assert data["recall"] == 1.0
        assert data["mask_ap"] == 1.0


class TestHarvestCommand:
    def test_summary_and_records(self, runner, tmp_path):
        out = tmp_path / "summary.json"
        records = tmp_path / "records.csv"
        result = runner.invoke(main, [
            "harvest", "run", "--trials", "40", "--seed", "7",
            "--out", str(out), "--records", str(records), "--no-plot"])
        assert result.exit_code == 0, result.output
        summary = json.loads(out.read_text())
        assert summary["n_trials"] == 40
        assert 0.0 <= summary["success_rate"] <= 1.0
        header, rows = read_csv(records)
        assert header[:3] == ["trial", "outcome", "failure_mode"]
        assert header[-2:] == ["total_s", "peak_force_N"]
        assert len(rows) == 40

    def test_missing_config_section_names_it(self, runner, tmp_path):
        data = RunConfig.default().to_dict()
        del data["control"]
        cfg_path = tmp_path / "broken.yaml"
        cfg_path.write_text(yaml.safe_dump(data))
        out = tmp_path / "summary.json"
        result = runner.invoke(main, [
            "harvest", "run", "--trials", "5", "--seed", "1",
            "--config", str(cfg_path), "--out", str(out)])
        assert result.exit_code == 2
        assert "control" in result.output
        assert not out.exists()


class TestDeterminism:
    def test_harvest_rerun_byte_identical(self, runner, tmp_path):
        outputs = {}
        for tag in ("a", "b"):
            out = tmp_path / tag / "summary.json"
            rec = tmp_path / tag / "records.csv"
            out.parent.mkdir()
            result = runner.invoke(main, [
                "harvest", "run", "--trials", "60", "--seed", "13",
                "--out", str(out), "--records", str(rec)])
            assert result.exit_code == 0, result.output
            outputs[tag] = (out.read_bytes(), rec.read_bytes(),
                            out.with_suffix(".png").read_bytes())
        assert outputs["a"] == outputs["b"]

    def test_grasp_rerun_byte_identical(self, runner, tmp_path):
        blobs = []
        for tag in ("x", "y"):
            out = tmp_path / f"{tag}.csv"
            result = runner.invoke(main, [
                "grasp", "--tomato", "F3", "--ref", "0.3", "--duration", "5",
                "--seed", "21", "--out", str(out)])
            assert result.exit_code == 0, result.output
            blobs.append((out.read_bytes(), out.with_suffix(".png").read_bytes()))
        assert blobs[0] == blobs[1]
