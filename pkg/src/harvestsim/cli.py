"""Unified command-line interface.

Every command loads the shared config (built-in defaults unless --config is
given), applies flag overrides, computes fully in memory, and only then
writes its outputs: the delimited data, a rendered figure (unless --no-plot)
and a manifest recording config hash + seed + file list.  Stochastic
commands require --seed.  Exit codes: 2 config/validation, 3 domain
infeasibility, 4 I/O failure.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import arm as armmod
from . import control as controlmod
from . import figures
from . import harvest as harvestmod
from . import mechanism as mechmod
from . import perception as percmod
from . import plant as plantmod
from .config import RunConfig, RunManifest
from .errors import ConfigInvalid, HarvestSimError

EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_IO = 4


def _load_config(config_path: str | None, seed: int | None = None) -> RunConfig:
    try:
        cfg = RunConfig.from_yaml(config_path) if config_path else RunConfig.default()
    except (ConfigInvalid, ValueError) as exc:
        raise SystemExit(_fail(EXIT_CONFIG, f"config error: {exc}"))
    except OSError as exc:
        raise SystemExit(_fail(EXIT_IO, f"cannot read config: {exc}"))
    if seed is not None:
        cfg.seed = seed
    return cfg


def _fail(code: int, message: str) -> int:
    click.echo(message, err=True)
    return code


def _write_manifest(cfg: RunConfig, command: str, outputs: list[Path]) -> Path:
    primary = outputs[0]
    path = primary.with_suffix(primary.suffix + ".manifest.json")
    manifest = RunManifest.for_run(cfg, command, [str(p) for p in outputs])
    manifest.write(path)
    return path


def _guard_domain(fn):
    """Run fn(), mapping domain errors to exit 3 and I/O errors to 4."""
    try:
        return fn()
    except ConfigInvalid as exc:
        raise SystemExit(_fail(EXIT_CONFIG, f"config error: {exc}"))
    except HarvestSimError as exc:
        raise SystemExit(_fail(EXIT_DOMAIN, f"{type(exc).__name__}: {exc}"))
    except OSError as exc:
        raise SystemExit(_fail(EXIT_IO, f"i/o error: {exc}"))


def _pick_tomato(cfg: RunConfig, name: str, custom: str | None) -> plantmod.TomatoSample:
    if name == "custom":
        if not custom:
            raise SystemExit(_fail(
                EXIT_CONFIG, "--tomato custom requires "
                "--custom mass_g,diameter_mm,stiffness,friction"))
        try:
            mass, diameter, stiffness, mu = (float(v) for v in custom.split(","))
            sample = plantmod.TomatoSample("custom", mass, diameter, stiffness, mu)
            sample.validate()
        except ValueError as exc:
            raise SystemExit(_fail(EXIT_CONFIG, f"bad --custom: {exc}"))
        return sample
    if name not in cfg.tomatoes:
        raise SystemExit(_fail(
            EXIT_CONFIG,
            f"unknown tomato '{name}' (have {sorted(cfg.tomatoes)})"))
    return cfg.tomatoes[name]


@click.group()
def main() -> None:
    """Harvesting-system simulation suite."""


# ----------------------------------------------------------------- mech
@main.group()
def mech() -> None:
    """Gripper linkage analysis."""


@mech.command("torque-curve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--p-max", type=float, default=1.0, show_default=True,
              help="Largest grasp force on the grid (N).")
@click.option("--points", type=int, default=21, show_default=True)
@click.option("--fingers", type=int, default=6, show_default=True)
@click.option("--eta", type=float, default=0.8, show_default=True,
              help="Transmission efficiency for the multi-finger demand.")
@click.option("--theta-start-deg", type=float, default=None,
              help="Closure schedule start angle (defaults from geometry range).")
@click.option("--theta-end-deg", type=float, default=None)
@click.option("--plot/--no-plot", default=True, show_default=True)
def cmd_torque_curve(config_path, out, p_max, points, fingers, eta,
                     theta_start_deg, theta_end_deg, plot) -> None:
    """Force-torque curve along the closure schedule (CSV + figure)."""
    cfg = _load_config(config_path)
    if points < 1:
        raise SystemExit(_fail(EXIT_CONFIG, "--points must be >= 1"))
    if p_max <= 0.0:
        raise SystemExit(_fail(EXIT_CONFIG, "--p-max must be > 0"))
    geom = cfg.geometry
    span = geom.theta_max - geom.theta_min
    theta_start = (geom.theta_min + span / 6.0 if theta_start_deg is None
                   else np.radians(theta_start_deg))
    theta_end = (geom.theta_min + 5.0 * span / 6.0 if theta_end_deg is None
                 else np.radians(theta_end_deg))

    def compute():
        schedule = mechmod.linear_contact_schedule(theta_start, theta_end, p_max)
        grid = [p_max * i / (points - 1) if points > 1 else 0.0
                for i in range(points)]
        curve = mechmod.force_torque_curve(geom, schedule, grid)
        return [{"P_newton": p, "T_newton_mm": t,
                 "T_demand_newton_mm": mechmod.total_actuation_demand(t, fingers, eta)}
                for p, t in curve]

    rows = _guard_domain(compute)
    out_path = Path(out)

    def write():
        with open(out_path, "w", newline="") as fh:
            fh.write("P_newton,T_newton_mm,T_demand_newton_mm\n")
            for r in rows:
                fh.write(f"{r['P_newton']:.9g},{r['T_newton_mm']:.9g},"
                         f"{r['T_demand_newton_mm']:.9g}\n")
        outputs = [out_path]
        if plot:
            fig_path = out_path.with_suffix(".png")
            figures.torque_curve_figure(rows, fig_path, fingers, eta)
            outputs.append(fig_path)
        outputs.append(_write_manifest(cfg, "mech torque-curve", outputs))

    _guard_domain(write)
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


@mech.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--points", type=int, default=1000, show_default=True)
@click.option("--force", "p_force", type=float, default=1.0, show_default=True,
              help="Transmitted force P for the torque columns (N).")
@click.option("--plot/--no-plot", default=True, show_default=True)
def cmd_sweep(config_path, out, points, p_force, plot) -> None:
    """Crank sweep diagnostic incl. the torque-formulation discrepancy."""
    cfg = _load_config(config_path)
    if points < 2:
        raise SystemExit(_fail(EXIT_CONFIG, "--points must be >= 2"))
    geom = cfg.geometry

    def compute():
        thetas = [geom.theta_min + (geom.theta_max - geom.theta_min) * i / (points - 1)
                  for i in range(points)]
        return mechmod.torque_discrepancy_table(geom, thetas, p=p_force)

    rows = _guard_domain(compute)
    out_path = Path(out)

    def write():
        cols = list(rows[0].keys())
        with open(out_path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for r in rows:
                fh.write(",".join(f"{r[c]:.9g}" for c in cols) + "\n")
        outputs = [out_path]
        if plot:
            fig_path = out_path.with_suffix(".png")
            figures.sweep_figure(rows, fig_path)
            outputs.append(fig_path)
        outputs.append(_write_manifest(cfg, "mech sweep", outputs))

    _guard_domain(write)
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


# ---------------------------------------------------------------- grasp
@main.command("grasp")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--tomato", default="F3", show_default=True,
              help="Sample id from the config table, or 'custom'.")
@click.option("--custom", default=None,
              help="mass_g,diameter_mm,stiffness_n_per_mm,friction_mu")
@click.option("--ref", default="auto", show_default=True,
              help="Reference force in N, or 'auto' for the mass-scaled policy.")
@click.option("--gains", default=None, help="kp,ki,kd override.")
@click.option("--duration", type=float, default=10.0, show_default=True)
@click.option("--release-at", type=float, default=None,
              help="Command release (reference to 0) from this time on.")
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--plot/--no-plot", default=True, show_default=True)
def cmd_grasp(config_path, tomato, custom, ref, gains, duration, release_at,
              seed, out, plot) -> None:
    """Closed-loop grasp trace (CSV + figure)."""
    cfg = _load_config(config_path, seed)
    sample = _pick_tomato(cfg, tomato, custom)
    pid = cfg.gains
    if gains:
        try:
            kp, ki, kd = (float(v) for v in gains.split(","))
            pid = controlmod.PidGains(kp, ki, kd)
            pid.validate()
        except ValueError as exc:
            raise SystemExit(_fail(EXIT_CONFIG, f"bad --gains: {exc}"))
    if ref == "auto":
        f_ref = plantmod.reference_force(sample, cfg.reference)
    else:
        try:
            f_ref = float(ref)
        except ValueError:
            raise SystemExit(_fail(EXIT_CONFIG, "--ref must be a number or 'auto'"))

    def compute():
        return controlmod.run_grasp(
            sample, pid, f_ref, duration=duration, dt=cfg.dt, seed=cfg.seed,
            servo=cfg.servo, fsr=cfg.fsr, contact=cfg.contact,
            params=cfg.control_params, release_time=release_at)

    trace = _guard_domain(compute)
    held = trace
    if release_at is not None:
        # metrics describe the grasp-and-hold phase, not the release tail
        n_hold = max(1, int(release_at / cfg.dt))
        held = controlmod.ForceTrace(
            dt=trace.dt, time=trace.time[:n_hold],
            f_ref=trace.f_ref[:n_hold], f_meas=trace.f_meas[:n_hold],
            f_true=trace.f_true[:n_hold], command=trace.command[:n_hold],
            servo_angle=trace.servo_angle[:n_hold])
    metrics = controlmod.response_metrics(held, band=cfg.control_params.settle_band)
    out_path = Path(out)

    def write():
        trace.write_csv(out_path)
        outputs = [out_path]
        if plot:
            fig_path = out_path.with_suffix(".png")
            figures.trace_figure(trace, fig_path)
            outputs.append(fig_path)
        outputs.append(_write_manifest(cfg, "grasp", outputs))

    _guard_domain(write)
    click.echo(f"wrote {out_path}: ref={f_ref:.3f} N plateau={held.plateau():.3f} N "
               f"settle={metrics.settle_time:.2f} s overshoot={metrics.overshoot:.1%} "
               f"dev={metrics.steady_state_dev:.4f} N")


# ----------------------------------------------------------------- tune
@main.command("tune")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--tomato", default="F3", show_default=True)
@click.option("--custom", default=None)
@click.option("--ref", type=float, default=0.30, show_default=True)
@click.option("--kp-grid", default=None,
              help="Comma-separated ascending kp values to sweep.")
@click.option("--duration", type=float, default=8.0, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_tune(config_path, tomato, custom, ref, kp_grid, duration, seed, out) -> None:
    """Ultimate-gain autotune; writes the resulting gains as JSON."""
    cfg = _load_config(config_path, seed)
    sample = _pick_tomato(cfg, tomato, custom)
    grid = controlmod.DEFAULT_KP_GRID
    if kp_grid:
        try:
            grid = tuple(float(v) for v in kp_grid.split(","))
        except ValueError as exc:
            raise SystemExit(_fail(EXIT_CONFIG, f"bad --kp-grid: {exc}"))

    def compute():
        return controlmod.zn_autotune(
            sample, grid, ref, duration=duration, dt=cfg.dt, seed=cfg.seed,
            servo=cfg.servo, fsr=cfg.fsr, contact=cfg.contact,
            params=cfg.control_params)

    tuning = _guard_domain(compute)
    out_path = Path(out)

    def write():
        with open(out_path, "w") as fh:
            json.dump({
                "kp": tuning.gains.kp, "ki": tuning.gains.ki,
                "kd": tuning.gains.kd,
                "ultimate_gain": tuning.ultimate_gain,
                "oscillation_period_s": tuning.oscillation_period,
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(cfg, "tune", [out_path])

    _guard_domain(write)
    click.echo(f"wrote {out_path}: Ku={tuning.ultimate_gain:g} "
               f"Pu={tuning.oscillation_period:.3f} s")


# ----------------------------------------------------------------- plan
@main.command("plan")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--target", required=True,
              help="x,y,z in mm, optionally ,ax,ay,az approach direction.")
@click.option("--pso", "pso_spec", default=None,
              help="particles,iters,w,c1,c2 override.")
@click.option("--duration", type=float, default=5.0, show_default=True)
@click.option("--dt", type=float, default=0.02, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--plot/--no-plot", default=True, show_default=True)
def cmd_plan(config_path, target, pso_spec, duration, dt, seed, out, plot) -> None:
    """PSO goal solve + cubic trajectory (CSV + figure)."""
    cfg = _load_config(config_path, seed)
    try:
        vals = [float(v) for v in target.split(",")]
    except ValueError:
        raise SystemExit(_fail(EXIT_CONFIG, "--target must be numeric"))
    if len(vals) == 3:
        pose = armmod.Pose(position=np.array(vals), approach=np.array([0.0, 0.0, 1.0]))
        direction_given = False
    elif len(vals) == 6:
        axis = np.array(vals[3:])
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise SystemExit(_fail(EXIT_CONFIG, "--target approach axis is zero"))
        pose = armmod.Pose(position=np.array(vals[:3]), approach=axis / norm)
        direction_given = True
    else:
        raise SystemExit(_fail(EXIT_CONFIG, "--target needs 3 or 6 numbers"))
    params = cfg.pso
    if pso_spec:
        try:
            n, iters, w, c1, c2 = (float(v) for v in pso_spec.split(","))
            params = dataclasses.replace(params, particle_count=int(n),
                                         iteration_count=int(iters),
                                         inertia=w, cognitive=c1, social=c2)
        except ValueError as exc:
            raise SystemExit(_fail(EXIT_CONFIG, f"bad --pso: {exc}"))
    params = dataclasses.replace(params, seed=cfg.seed)
    if not direction_given:
        params = dataclasses.replace(params, direction_weight=0.0)

    def compute():
        result = armmod.pso_solve_goal(cfg.chain, pose, params)
        traj = armmod.plan_trajectory(cfg.chain, np.array(cfg.harvest.q_home),
                                      result.q, duration, dt=dt,
                                      velocity_limit=cfg.velocity_limit)
        return result, traj

    result, traj = _guard_domain(compute)
    out_path = Path(out)

    def write():
        traj.write_csv(out_path)
        outputs = [out_path]
        if plot:
            fig_path = out_path.with_suffix(".png")
            figures.trajectory_figure(traj, fig_path)
            outputs.append(fig_path)
        outputs.append(_write_manifest(cfg, "plan", outputs))

    _guard_domain(write)
    if not result.converged:
        click.echo(f"warning: solver cost {result.cost:.3f} above "
                   f"threshold {params.converged_cost:g} (best effort)", err=True)
    click.echo(f"wrote {out_path}: cost={result.cost:.4f} "
               f"q*=[{', '.join(f'{v:.4f}' for v in result.q)}]")


# ------------------------------------------------------------ perception
@main.group()
def perception() -> None:
    """Synthetic perception evaluation."""


@perception.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--scenes", type=int, default=50, show_default=True)
@click.option("--objects", type=int, default=6, show_default=True,
              help="Tomatoes per scene.")
@click.option("--noise", "noise_spec", default=None,
              help="kp_sigma_mm,miss_rate,false_positive_rate,confusion override.")
@click.option("--iou", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--export-scenes", "export_path", type=click.Path(), default=None,
              help="Also write the generated scenes as JSON.")
def cmd_perception_eval(config_path, scenes, objects, noise_spec, iou, seed,
                        out, export_path) -> None:
    """Generate scenes, run the detector stub, report metrics JSON."""
    cfg = _load_config(config_path, seed)
    noise = cfg.noise
    if noise_spec:
        try:
            kp_sigma, miss, fp, confusion = (float(v) for v in noise_spec.split(","))
            noise = percmod.NoiseModel(
                keypoint_sigma=kp_sigma, miss_rate=miss,
                false_positive_rate=fp, ripeness_confusion=confusion,
                occlusion_miss_gain=cfg.noise.occlusion_miss_gain)
            noise.validate()
        except ValueError as exc:
            raise SystemExit(_fail(EXIT_CONFIG, f"bad --noise: {exc}"))
    if scenes < 1 or objects < 1:
        raise SystemExit(_fail(EXIT_CONFIG, "--scenes and --objects must be >= 1"))

    def compute():
        rng = np.random.default_rng(cfg.seed)
        pairs = []
        all_scenes = []
        for _ in range(scenes):
            scene = percmod.generate_scene(objects, cfg.scene, rng)
            dets = percmod.simulate_detections(scene, noise, rng, cfg.scene)
            pairs.append((scene, dets))
            all_scenes.append(scene)
        metrics = percmod.evaluate_batch(pairs, iou_threshold=iou)
        try:
            kp = percmod.keypoint_error(
                [o for gt, _ in pairs for o in gt],
                [d for _, dets in pairs for d in dets], iou_threshold=iou)
            kp_dict = {"center_mean_mm": kp.center_mean,
                       "center_max_mm": kp.center_max,
                       "pedicel_mean_mm": kp.pedicel_mean,
                       "pedicel_max_mm": kp.pedicel_max,
                       "n_pairs": kp.n_pairs}
        except HarvestSimError:
            kp_dict = None
        return metrics, kp_dict, all_scenes

    metrics, kp_dict, all_scenes = _guard_domain(compute)
    out_path = Path(out)

    def write():
        with open(out_path, "w") as fh:
            json.dump({
                "precision": metrics.precision,
                "recall": metrics.recall,
                "mask_ap": metrics.mask_ap,
                "iou_threshold": iou,
                "scenes": scenes,
                "objects_per_scene": objects,
                "keypoint_errors": kp_dict,
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs = [out_path]
        if export_path:
            with open(export_path, "w") as fh:
                fh.write(percmod.scenes_to_json(all_scenes))
            outputs.append(Path(export_path))
        outputs.append(_write_manifest(cfg, "perception eval", outputs))

    _guard_domain(write)
    click.echo(f"wrote {out_path}: precision={metrics.precision:.4f} "
               f"recall={metrics.recall:.4f} mask_ap={metrics.mask_ap:.4f}")


# -------------------------------------------------------------- harvest
@main.group()
def harvest() -> None:
    """Picking-cycle Monte Carlo."""


@harvest.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--trials", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "summary_path", type=click.Path(), required=True)
@click.option("--records", "records_path", type=click.Path(), default=None)
@click.option("--plot/--no-plot", default=True, show_default=True)
def cmd_harvest_run(config_path, trials, seed, summary_path, records_path,
                    plot) -> None:
    """Run a trial campaign; writes summary JSON (+ records CSV, figure)."""
    cfg = _load_config(config_path, seed)
    if trials < 1:
        raise SystemExit(_fail(EXIT_CONFIG, "--trials must be >= 1"))

    def compute():
        records = harvestmod.run_trials(trials, cfg.harvest, cfg.seed,
                                        tomatoes=list(cfg.tomatoes.values()))
        return records, harvestmod.summarize(records)

    records, summary = _guard_domain(compute)
    out_path = Path(summary_path)

    def write():
        with open(out_path, "w") as fh:
            json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs = [out_path]
        if records_path:
            rec_path = Path(records_path)
            stage_cols = [f"t_{s.value}" for s in harvestmod.STAGE_ORDER]
            with open(rec_path, "w", newline="") as fh:
                fh.write("trial,outcome,failure_mode," + ",".join(stage_cols)
                         + ",total_s,peak_force_N\n")
                for i, rec in enumerate(records):
                    mode = rec.failure_mode.value if rec.failure_mode else ""
                    durs = [rec.stage_durations.get(s) for s in harvestmod.STAGE_ORDER]
                    dur_str = ",".join("" if d is None else f"{d:.6g}" for d in durs)
                    fh.write(f"{i},{'success' if rec.success else 'fail'},{mode},"
                             f"{dur_str},{rec.total_time:.6g},{rec.peak_force:.6g}\n")
            outputs.append(rec_path)
        if plot:
            fig_path = out_path.with_suffix(".png")
            figures.campaign_figure(summary, fig_path)
            outputs.append(fig_path)
        outputs.append(_write_manifest(cfg, "harvest run", outputs))

    _guard_domain(write)
    click.echo(f"wrote {out_path}: success_rate={summary.success_rate:.4f} "
               f"mean_cycle={summary.mean_cycle_time:.2f} s")


if __name__ == "__main__":
    main()
