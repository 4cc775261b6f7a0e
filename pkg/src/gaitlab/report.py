"""Summary tables and per-figure plot data."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import events as ev
from .errors import GaitLabError, SchemaMismatch
from .metrics import SummaryRow
from .recording import EXO_CHANNEL, JOINTS, GaitRecording

TABLE_HEADER = ("Condition", "Peak Force (L/R) [N]", "Toe-off (L/R) [%]",
                "Ankle (SI, r)", "Knee (SI, r)", "Hip (SI, r)")
TABLE_JOINTS = ("ankle", "knee", "hip")


def condition_label(alpha: float, exo: bool = False) -> str:
    a = f"{alpha:g}"
    if "." not in a:
        a += ".0"
    pct = f"{alpha * 100:g}%"
    return f"{pct} strength{' + Exo' if exo else ''} (α={a})"


def _signed(x: float) -> str:
    s = f"{x:+.1f}"
    return "+0.0" if s == "-0.0" else s


def _joint_cell(si, r) -> str:
    si_s = "n/a" if si is None else _signed(si)
    r_s = "n/a" if r is None else f"{r:.3f}"
    return f"{si_s}, {r_s}"


def table_cells(row: SummaryRow) -> list[str]:
    cells = [
        row.condition or "unlabeled",
        f"{row.peak_force_L} / {row.peak_force_R}",
        f"{row.toe_off_L:.0f} / {row.toe_off_R:.0f}",
    ]
    cells += [_joint_cell(row.joints[j].si, row.joints[j].r) for j in TABLE_JOINTS]
    return cells


def render_table(rows: Sequence[SummaryRow]) -> str:
    """Fixed-width table, one line per condition, columns in summary-table order."""
    body = [table_cells(r) for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(TABLE_HEADER)]

    def line(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([line(TABLE_HEADER), rule, *(line(b) for b in body)]) + "\n"


def summary_json(row: SummaryRow) -> str:
    return json.dumps(row.to_dict(), indent=2, ensure_ascii=False) + "\n"


def write_summary(row: SummaryRow, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    js = out / "summary.json"
    js.write_text(summary_json(row), encoding="utf-8")
    txt = out / "summary.txt"
    txt.write_text(render_table([row]), encoding="utf-8")
    return js, txt


def load_summary(path) -> SummaryRow:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GaitLabError(f"{path}: not JSON ({exc})") from None
    return SummaryRow.from_dict(doc)


def load_summaries(paths) -> list[SummaryRow]:
    rows = []
    versions = set()
    for p in paths:
        doc = json.loads(Path(p).read_text(encoding="utf-8")) if Path(p).exists() else None
        if doc is None:
            raise FileNotFoundError(f"no such file: {p}")
        versions.add(doc.get("schema_version"))
        rows.append(doc)
    if len(versions) > 1:
        raise SchemaMismatch(f"summaries mix schema versions {sorted(map(str, versions))}")
    return [SummaryRow.from_dict(d) for d in rows]


# ---------------------------------------------------------------- plot data

def _percent(n: int) -> np.ndarray:
    return np.arange(n) * 100.0 / (n - 1)


def _stack(cycles, series: np.ndarray, n: int, stance_only: bool = False) -> np.ndarray:
    rows = []
    for c in cycles:
        seg = series[c.start_index:(c.toe_off_index if stance_only else c.end_index) + 1]
        rows.append(ev.time_normalize(seg, n).values)
    return np.array(rows)


def _mean_sd(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sd = stack.std(axis=0, ddof=1) if len(stack) > 1 else np.zeros(stack.shape[1])
    return stack.mean(axis=0), sd


def _write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(columns[0])):
            w.writerow([format(float(c[i]), ".10g") for c in columns])
    return path


def plot_data(row: SummaryRow, rec: GaitRecording, out_dir, n: int = 101) -> dict[str, Path]:
    """Write the per-figure CSVs for one analyzed recording, keyed by file stem.

    * ``fig2_joint_angles.csv``: angle mean/SD over the gait cycle per joint and side
    * ``fig2_toe_off.csv``: toe-off marker (percent of cycle) mean/SD per side
    * ``fig3_stance_force.csv``: GRF mean/SD over normalized stance per side
    * ``fig5_exo_torque.csv``: right exo torque over the right gait cycle (exo runs only)
    """
    if row.detail is None:
        raise GaitLabError("summary has no per-cycle detail; re-run the analysis")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pct = _percent(n)
    files: dict[str, Path] = {}

    header, cols = ["percent_cycle"], [pct]
    for j in JOINTS:
        for s in ("L", "R"):
            m, sd = _mean_sd(_stack(row.detail[s].cycles, rec[f"q_{j}_{s}"], n))
            header += [f"{j}_{s}_mean", f"{j}_{s}_sd"]
            cols += [m, sd]
    files["fig2_joint_angles"] = _write_csv(out / "fig2_joint_angles.csv", header, cols)

    toe = {s: np.array([100.0 * (c.toe_off - c.start) / (c.end - c.start) for c in row.detail[s].cycles])
           for s in ("L", "R")}
    with (out / "fig2_toe_off.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["side", "toe_off_mean", "toe_off_sd"])
        for s in ("L", "R"):
            sd = toe[s].std(ddof=1) if len(toe[s]) > 1 else 0.0
            w.writerow([s, format(toe[s].mean(), ".10g"), format(sd, ".10g")])
    files["fig2_toe_off"] = out / "fig2_toe_off.csv"

    header, cols = ["percent_stance"], [pct]
    for s in ("L", "R"):
        m, sd = _mean_sd(_stack(row.detail[s].cycles, rec[f"grf_{s}"], n, stance_only=True))
        header += [f"grf_{s}_mean", f"grf_{s}_sd"]
        cols += [m, sd]
    files["fig3_stance_force"] = _write_csv(out / "fig3_stance_force.csv", header, cols)

    if EXO_CHANNEL in rec.channels:
        m, sd = _mean_sd(_stack(row.detail["R"].cycles, rec[EXO_CHANNEL], n))
        files["fig5_exo_torque"] = _write_csv(out / "fig5_exo_torque.csv",
                                              ["percent_cycle", "torque_mean", "torque_sd"], [pct, m, sd])
    return files


def read_plot_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [row for row in r]
    return {h: np.array([float(d[i]) for d in data]) if h != "side" else np.array([d[i] for d in data])
            for i, h in enumerate(header)}


def comparison_data(dirs: Sequence[Path], labels: Sequence[str], out_path) -> Path | None:
    """Long-format overlay of several conditions' joint curves (condition comparison figure)."""
    series = [(lab, Path(d) / "fig2_joint_angles.csv") for lab, d in zip(labels, dirs)]
    series = [(lab, p) for lab, p in series if p.exists()]
    if len(series) < 2:
        return None
    out_path = Path(out_path)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "joint", "side", "percent_cycle", "mean", "sd"])
        for lab, p in series:
            d = read_plot_csv(p)
            for j in JOINTS:
                for s in ("L", "R"):
                    for x, m, sd in zip(d["percent_cycle"], d[f"{j}_{s}_mean"], d[f"{j}_{s}_sd"]):
                        w.writerow([lab, j, s, format(x, ".10g"), format(m, ".10g"), format(sd, ".10g")])
    return out_path
