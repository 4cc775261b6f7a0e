"""Render the plot-data CSVs to PNG files (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .recording import JOINTS  # noqa: E402
from .report import read_plot_csv  # noqa: E402

SIDE_STYLE = {"L": dict(color="tab:blue", label="Left"), "R": dict(color="tab:red", label="Right")}
DPI = 120


def _band(ax, x, mean, sd, **style):
    ax.plot(x, mean, lw=1.6, **style)
    ax.fill_between(x, mean - sd, mean + sd, color=style.get("color"), alpha=0.2, lw=0)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def joint_angles(csv_dir, out: Path | None = None, title: str = "") -> Path:
    csv_dir = Path(csv_dir)
    d = read_plot_csv(csv_dir / "fig2_joint_angles.csv")
    toe_path = csv_dir / "fig2_toe_off.csv"
    toe = read_plot_csv(toe_path) if toe_path.exists() else None
    fig, axes = plt.subplots(1, len(JOINTS), figsize=(4 * len(JOINTS), 3.2), sharex=True)
    x = d["percent_cycle"]
    for ax, j in zip(axes, JOINTS):
        for s, style in SIDE_STYLE.items():
            _band(ax, x, np.degrees(d[f"{j}_{s}_mean"]), np.degrees(d[f"{j}_{s}_sd"]), **style)
        if toe is not None:
            for side, m in zip(toe["side"], toe["toe_off_mean"]):
                ax.axvline(m, color=SIDE_STYLE[side]["color"], ls="--", lw=0.9)
        ax.set_title(j.capitalize())
        ax.set_xlabel("Gait cycle [%]")
        ax.set_xlim(0, 100)
    axes[0].set_ylabel("Angle [deg]")
    axes[0].legend(frameon=False, fontsize=8)
    if title:
        fig.suptitle(title)
    return _save(fig, out or csv_dir / "fig2_joint_angles.png")


def stance_force(csv_dir, out: Path | None = None, title: str = "") -> Path:
    csv_dir = Path(csv_dir)
    d = read_plot_csv(csv_dir / "fig3_stance_force.csv")
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for s, style in SIDE_STYLE.items():
        _band(ax, d["percent_stance"], d[f"grf_{s}_mean"], d[f"grf_{s}_sd"], **style)
    ax.set_xlabel("Stance [%]")
    ax.set_ylabel("Contact force [N]")
    ax.set_xlim(0, 100)
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, out or csv_dir / "fig3_stance_force.png")


def exo_torque(csv_dir, out: Path | None = None, title: str = "") -> Path | None:
    csv_dir = Path(csv_dir)
    path = csv_dir / "fig5_exo_torque.csv"
    if not path.exists():
        return None
    d = read_plot_csv(path)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    _band(ax, d["percent_cycle"], d["torque_mean"], d["torque_sd"], color="tab:green")
    toe_path = csv_dir / "fig2_toe_off.csv"
    if toe_path.exists():
        toe = read_plot_csv(toe_path)
        for side, m in zip(toe["side"], toe["toe_off_mean"]):
            if side == "R":
                ax.axvline(m, color="k", ls="--", lw=0.9)
    ax.axhline(0, color="0.6", lw=0.6)
    ax.set_xlabel("Right gait cycle [%]")
    ax.set_ylabel("Exo torque [N m] (+ dorsiflexion)")
    ax.set_xlim(0, 100)
    if title:
        ax.set_title(title)
    return _save(fig, out or csv_dir / "fig5_exo_torque.png")


def comparison(csv_path, out: Path | None = None, side: str = "R") -> Path:
    """Overlay one side's joint curves across conditions from the long-format comparison CSV."""
    import csv

    csv_path = Path(csv_path)
    curves: dict[tuple[str, str], list[tuple[float, float, float]]] = {}
    order: list[str] = []
    with csv_path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["side"] != side:
                continue
            if row["condition"] not in order:
                order.append(row["condition"])
            curves.setdefault((row["condition"], row["joint"]), []).append(
                (float(row["percent_cycle"]), float(row["mean"]), float(row["sd"])))
    fig, axes = plt.subplots(1, len(JOINTS), figsize=(4 * len(JOINTS), 3.2), sharex=True)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for ax, j in zip(axes, JOINTS):
        for k, cond in enumerate(order):
            a = np.array(curves[(cond, j)])
            _band(ax, a[:, 0], np.degrees(a[:, 1]), np.degrees(a[:, 2]), color=colors[k % len(colors)], label=cond)
        ax.set_title(f"{j.capitalize()} ({side})")
        ax.set_xlabel("Gait cycle [%]")
        ax.set_xlim(0, 100)
    axes[0].set_ylabel("Angle [deg]")
    axes[0].legend(frameon=False, fontsize=7)
    return _save(fig, out or csv_path.with_suffix(".png"))


def render_all(csv_dir, title: str = "") -> list[Path]:
    made = [joint_angles(csv_dir, title=title), stance_force(csv_dir, title=title)]
    exo = exo_torque(csv_dir, title=title)
    if exo is not None:
        made.append(exo)
    return made


def render_comparison(csv_paths: Sequence[Path]) -> list[Path]:
    return [comparison(p) for p in csv_paths]
