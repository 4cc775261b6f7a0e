"""Gait symmetry metrics and per-condition summaries.

Sign conventions: positive stance asymmetry means a longer left stance,
positive SI means a larger left range of motion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import events as ev
from .errors import (
    BothZero,
    EmptySeries,
    GaitLabError,
    NoCycles,
    NonPositiveDuration,
    SchemaMismatch,
    ZeroVariance,
)
from .events import GaitCycle, NormalizedTrajectory, Side
from .recording import JOINTS, GaitRecording

SCHEMA_VERSION = 1


def stance_asymmetry(t_left: float, t_right: float) -> float:
    if not (t_left > 0 and t_right > 0):
        raise NonPositiveDuration(f"stance durations must be positive ({t_left}, {t_right})")
    return (t_left - t_right) / (0.5 * (t_left + t_right))


def rom(traj: Sequence[float]) -> float:
    x = np.asarray(traj, dtype=float)
    if x.size == 0:
        raise EmptySeries("range of motion of an empty series")
    if not np.all(np.isfinite(x)):
        raise EmptySeries("series contains non-finite values")
    return float(x.max() - x.min())


def symmetry_index(rom_left: float, rom_right: float) -> float:
    """ROM symmetry index in percent."""
    if rom_left < 0 or rom_right < 0:
        raise ValueError("ROM values must be non-negative")
    if rom_left == 0 and rom_right == 0:
        raise BothZero("SI undefined when both ROMs are zero")
    return 100.0 * (rom_left - rom_right) / (0.5 * (rom_left + rom_right))


def _values(t) -> np.ndarray:
    return np.asarray(t.values if isinstance(t, NormalizedTrajectory) else t, dtype=float)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("pearson needs two equal-length series of >= 2 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant trajectory")
    r = float(np.dot(xc, yc)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def trajectory_correlation(mean_left, mean_right) -> float:
    return pearson(_values(mean_left), _values(mean_right))


def toe_off_percent(cycle: GaitCycle) -> float:
    return 100.0 * (cycle.toe_off - cycle.start) / (cycle.end - cycle.start)


@dataclass(frozen=True)
class ForceStats:
    mean: float
    sd: float
    n: int

    def __str__(self):
        return f"{self.mean:.1f}±{self.sd:.1f}"


def mean_sd(values: Sequence[float]) -> ForceStats:
    v = np.asarray(values, float)
    if v.size == 0:
        raise NoCycles("no values to summarize")
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return ForceStats(float(v.mean()), sd, int(v.size))


def peak_force_stats(cycles: Sequence[GaitCycle], grf: Sequence[float], sample_rate: float | None = None,
                     ) -> ForceStats:
    """Mean and sample SD (N-1) of per-cycle peak force over [start, end]."""
    if not cycles:
        raise NoCycles("peak force needs at least one cycle")
    g = np.asarray(grf, float)
    peaks = [float(ev.extract_cycle(c, g).max()) for c in cycles]
    return mean_sd(peaks)


# ------------------------------------------------------------------ summary

@dataclass
class AnalysisConfig:
    event_threshold: float = ev.EVENT_THRESHOLD
    stance_threshold: float = ev.STANCE_THRESHOLD
    min_separation: float = ev.MIN_SEPARATION
    last_fraction: float = 0.5
    n_points: int = ev.N_POINTS
    # "rom-average": SI of cycle-averaged ROMs; "per-cycle": mean of per-cycle SI
    si_mode: str = "rom-average"
    normalize_contact: bool = False

    @classmethod
    def from_dict(cls, d: dict | None) -> AnalysisConfig:
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise GaitLabError(f"unknown analysis config keys: {sorted(unknown)}")
        cfg = cls(**d)
        if cfg.si_mode not in ("rom-average", "per-cycle"):
            raise GaitLabError(f"si_mode must be 'rom-average' or 'per-cycle', got {cfg.si_mode!r}")
        return cfg


@dataclass
class JointSymmetry:
    si: float | None
    r: float | None
    rom_left: float
    rom_right: float


@dataclass
class SideDetail:
    """Per-side intermediate results kept for plot-data emission."""

    cycles: list[GaitCycle]
    skipped: int
    events: list[ev.GaitEvent]
    stance: dict[str, np.ndarray] = field(default_factory=dict)   # joint -> (n_cycles, n_points)


@dataclass
class SummaryRow:
    condition: str
    peak_force_L: ForceStats
    peak_force_R: ForceStats
    toe_off_L: float
    toe_off_R: float
    joints: dict[str, JointSymmetry]
    stance_asym: float
    stance_time_L: float
    stance_time_R: float
    n_cycles_L: int
    n_cycles_R: int
    stance_ratio_L: float | None = None
    stance_ratio_R: float | None = None
    skipped_L: int = 0
    skipped_R: int = 0
    detail: dict[str, SideDetail] | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("detail", None)
        d["schema_version"] = SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SummaryRow:
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaMismatch(f"summary schema version {version!r} != {SCHEMA_VERSION}")
        d = {k: v for k, v in d.items() if k != "schema_version"}
        d["peak_force_L"] = ForceStats(**d["peak_force_L"])
        d["peak_force_R"] = ForceStats(**d["peak_force_R"])
        d["joints"] = {k: JointSymmetry(**v) for k, v in d["joints"].items()}
        return cls(**d)


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except GaitLabError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise


def _side_cycles(rec: GaitRecording, side: Side, cfg: AnalysisConfig) -> SideDetail:
    evs = _staged(f"detect[{side.value}]", ev.recording_events, rec, side,
                  cfg.event_threshold, cfg.min_separation)
    seg = ev.segment_cycles(evs, side)
    kept, skipped = seg.cycles, seg.skipped
    seams = seam_indices(rec)
    if seams:
        # cycles straddling the join of two concatenated episodes are not gait
        kept = [c for c in kept if not any(c.start_index < k <= c.end_index for k in seams)]
        skipped += len(seg.cycles) - len(kept)
    cycles = _staged(f"window[{side.value}]", ev.steady_state_window, kept, cfg.last_fraction)
    return SideDetail(cycles, skipped, evs)


def seam_indices(rec: GaitRecording) -> list[int]:
    """Sample indices where concatenated episodes join (``meta['seams']``)."""
    raw = rec.meta.get("seams", "")
    return [int(x) for x in raw.split(";") if x]


def condition_summary(rec: GaitRecording, cfg: AnalysisConfig | None = None) -> SummaryRow:
    """Detect, segment, window, and compute every Table-style metric for one recording."""
    cfg = cfg or AnalysisConfig()
    if cfg.normalize_contact:
        from .recording import normalize_contact
        rec = normalize_contact(rec)
    detail = {s.value: _side_cycles(rec, s, cfg) for s in (Side.LEFT, Side.RIGHT)}
    L, R = detail["L"], detail["R"]

    joints: dict[str, JointSymmetry] = {}
    for joint in JOINTS:  # fixed order keeps reductions reproducible
        roms, means = {}, {}
        for s, d in detail.items():
            segs = [_staged(f"extract[{joint}_{s}]", ev.extract_stance, c, rec, joint) for c in d.cycles]
            roms[s] = np.array([rom(x) for x in segs])
            stack = np.array([_staged(f"normalize[{joint}_{s}]", ev.time_normalize, x, cfg.n_points).values
                              for x in segs])
            d.stance[joint] = stack
            means[s] = stack.mean(axis=0)
        rl, rr = float(roms["L"].mean()), float(roms["R"].mean())
        try:
            if cfg.si_mode == "per-cycle":
                k = min(len(roms["L"]), len(roms["R"]))
                si = float(np.mean([symmetry_index(a, b) for a, b in zip(roms["L"][-k:], roms["R"][-k:])]))
            else:
                si = symmetry_index(rl, rr)
        except BothZero:
            si = None
        try:
            r = trajectory_correlation(means["L"], means["R"])
        except ZeroVariance:
            r = None
        joints[joint] = JointSymmetry(si, r, rl, rr)

    grf_L, grf_R = rec["grf_L"], rec["grf_R"]
    tl = float(np.mean([c.stance_duration for c in L.cycles]))
    tr = float(np.mean([c.stance_duration for c in R.cycles]))
    ratio = {}
    for s in ("L", "R"):
        foot = np.maximum(rec[f"contact_heel_{s}"], rec[f"contact_toe_{s}"])
        try:
            ratio[s] = ev.stance_ratio(foot, cfg.stance_threshold)
        except GaitLabError:
            ratio[s] = None
    return SummaryRow(
        condition=rec.condition,
        peak_force_L=_staged("peak_force[L]", peak_force_stats, L.cycles, grf_L, rec.sample_rate),
        peak_force_R=_staged("peak_force[R]", peak_force_stats, R.cycles, grf_R, rec.sample_rate),
        toe_off_L=float(np.mean([toe_off_percent(c) for c in L.cycles])),
        toe_off_R=float(np.mean([toe_off_percent(c) for c in R.cycles])),
        joints=joints,
        stance_asym=_staged("stance_asymmetry", stance_asymmetry, tl, tr),
        stance_time_L=tl,
        stance_time_R=tr,
        n_cycles_L=len(L.cycles),
        n_cycles_R=len(R.cycles),
        stance_ratio_L=ratio["L"],
        stance_ratio_R=ratio["R"],
        skipped_L=L.skipped,
        skipped_R=R.skipped,
        detail=detail,
    )
