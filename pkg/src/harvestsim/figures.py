"""Matplotlib renderers for the CLI report paths.

Each renderer takes already-computed data and writes one PNG next to the
delimited output.  The Agg backend keeps everything headless and the PNG
metadata is stripped so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVE_KW = dict(dpi=110, metadata={"Software": None})


def torque_curve_figure(rows: list[dict], path, fingers: int, efficiency: float) -> None:
    """Torque demand vs grasp force, single finger and full gripper."""
    p = [r["P_newton"] for r in rows]
    single = [r["T_newton_mm"] for r in rows]
    total = [r["T_demand_newton_mm"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(p, single, "o-", ms=3, label="single finger")
    ax.plot(p, total, "s-", ms=3,
            label=f"{fingers} fingers / eta={efficiency:g}")
    ax.set_xlabel("grasp force P (N)")
    ax.set_ylabel("motor torque (N mm)")
    ax.set_title("Torque demand along closure")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def sweep_figure(rows: list[dict], path) -> None:
    """Linkage sweep: solved angles and the two torque formulations."""
    theta = [r["theta_rad"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 6.5), sharex=True)
    ax1.plot(theta, [r["beta_rad"] for r in rows], label="beta")
    ax1.plot(theta, [r["xi_rad"] for r in rows], label="xi")
    ax1.plot(theta, [r["gamma_eff_rad"] for r in rows], "--",
             label="gamma_eff = pi - beta - xi")
    ax1.set_ylabel("angle (rad)")
    ax1.grid(alpha=0.3)
    ax1.legend()
    ax2.plot(theta, [r["T_vw_newton_mm"] for r in rows],
             label="virtual work (canonical)")
    ax2.plot(theta, [r["T_closed_form_newton_mm"] for r in rows],
             label="closed form variant")
    ax2.plot(theta, [r["discrepancy_newton_mm"] for r in rows], ":",
             label="discrepancy")
    ax2.set_xlabel("crank angle theta (rad)")
    ax2.set_ylabel("torque at P=1 N (N mm)")
    ax2.grid(alpha=0.3)
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def trace_figure(trace, path) -> None:
    """Grasp force regulation trace with the servo command context."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True,
                                   height_ratios=[2, 1])
    ax1.plot(trace.time, trace.f_ref, "b-", lw=1.2, label="reference")
    ax1.plot(trace.time, trace.f_meas, "r-", lw=0.8, label="measured")
    ax1.plot(trace.time, trace.f_true, "k--", lw=0.8, alpha=0.6, label="true")
    ax1.set_ylabel("force (N)")
    ax1.grid(alpha=0.3)
    ax1.legend()
    ax2.plot(trace.time, trace.servo_angle, "g-", lw=0.8)
    ax2.set_xlabel("time (s)")
    ax2.set_ylabel("servo angle (deg)")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def trajectory_figure(traj, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for j in range(traj.waypoints.shape[1]):
        ax.plot(traj.times, traj.waypoints[:, j], label=f"q{j + 1}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("joint angle (rad)")
    ax.set_title("Planned joint trajectory")
    ax.grid(alpha=0.3)
    ax.legend(ncol=5, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def campaign_figure(summary, path) -> None:
    """Stage-duration means and the failure-mode histogram."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 4.0),
                                   width_ratios=[3, 2])
    stages = list(summary.stage_means.keys())
    means = [summary.stage_means[s] for s in stages]
    ax1.bar(range(len(stages)), means, color="tab:green", alpha=0.8)
    ax1.set_xticks(range(len(stages)))
    ax1.set_xticklabels(stages, rotation=30, ha="right", fontsize=8)
    ax1.set_ylabel("mean duration (s)")
    ax1.set_title(f"successful cycle = {summary.mean_cycle_time:.2f} s")
    ax1.grid(alpha=0.3, axis="y")
    modes = list(summary.failure_histogram.keys())
    counts = [summary.failure_histogram[m] for m in modes]
    ax2.bar(range(len(modes)), counts, color="tab:red", alpha=0.8)
    ax2.set_xticks(range(len(modes)))
    ax2.set_xticklabels(modes, rotation=30, ha="right", fontsize=8)
    ax2.set_ylabel("failures")
    ax2.set_title(f"success rate {summary.success_rate:.1%}")
    ax2.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
