"""Gait recordings and reference trajectories: data model, CSV/JSON IO, validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    GaitLabError,
    MissingChannel,
    MissingJoint,
    NonFiniteSample,
    PhaseNotMonotone,
    RaggedSeries,
)

SIDES = ("L", "R")
JOINTS = ("hip", "knee", "ankle")
JOINT_CHANNELS = tuple(f"q_{j}_{s}" for j in JOINTS for s in SIDES)
REQUIRED_CHANNELS = (
    "q_hip_L", "q_hip_R", "q_knee_L", "q_knee_R", "q_ankle_L", "q_ankle_R",
    "grf_L", "grf_R",
    "contact_heel_L", "contact_heel_R", "contact_toe_L", "contact_toe_R",
)
CONTACT_CHANNELS = REQUIRED_CHANNELS[8:]
CSV_COLUMNS = ("time",) + REQUIRED_CHANNELS

# tracked joints, in observation / reward order
TRACKED_JOINTS = ("hip_L", "knee_L", "ankle_L", "hip_R", "knee_R", "ankle_R")
END_EFFECTORS = ("heel_L", "toe_L", "heel_R", "toe_R")
EXO_CHANNEL = "exo_torque_R"  # optional, present when the exo is attached

# optional tracking channels written by simulated rollouts (used to replay the reward)
REF_PHASE_CHANNEL = "ref_phase"
REWARD_CHANNEL = "reward"


def velocity_channel(joint: str) -> str:
    """``"knee_L"`` -> ``"qd_knee_L"``."""
    return f"qd_{joint}"


def ee_channels(effector: str) -> tuple[str, str]:
    """Pelvis-relative (x, z) channel names, e.g. ``ee_x_toe_R``."""
    return f"ee_x_{effector}", f"ee_z_{effector}"


def activation_channel(muscle: str) -> str:
    return f"act_{muscle}"

DEFAULT_GRAVITY = 9.81


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaitRecording:
    """Uniformly sampled gait time series for both legs.

    ``channels`` maps channel id to a read-only float array. Joint angles are
    radians, ``grf_*`` newtons, ``contact_*`` dimensionless (>= 0).
    """

    sample_rate: float
    channels: Mapping[str, np.ndarray]
    body_mass: float
    gravity: float = DEFAULT_GRAVITY
    condition: str = ""
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise GaitLabError(f"sample_rate must be positive, got {self.sample_rate}")
        if not (self.body_mass > 0 and math.isfinite(self.body_mass)):
            raise GaitLabError(f"body_mass must be positive, got {self.body_mass}")
        for name in REQUIRED_CHANNELS:
            if name not in self.channels:
                raise MissingChannel(name)
        chans = {k: _frozen(v) for k, v in self.channels.items()}
        lengths = {len(v) for v in chans.values()}
        if len(lengths) != 1:
            raise RaggedSeries(f"channel lengths differ: {sorted(lengths)}")
        for name, values in chans.items():
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                raise NonFiniteSample(int(bad[0]), name)
        for name in CONTACT_CHANNELS:
            if np.any(chans[name] < 0):
                raise GaitLabError(f"{name} has negative samples")
        object.__setattr__(self, "channels", MappingProxyType(chans))
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def n_samples(self) -> int:
        return len(self.channels["grf_L"])

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    @property
    def body_weight(self) -> float:
        return self.body_mass * self.gravity

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise MissingChannel(name) from None

    def with_channels(self, **updates) -> GaitRecording:
        chans = dict(self.channels)
        chans.update(updates)
        return GaitRecording(self.sample_rate, chans, self.body_mass, self.gravity,
                             self.condition, self.meta)

    def mirrored(self) -> GaitRecording:
        """Swap every ``*_L`` channel with its ``*_R`` twin."""
        chans = {}
        for name, values in self.channels.items():
            if name.endswith("_L"):
                chans[name[:-2] + "_R"] = values
            elif name.endswith("_R"):
                chans[name[:-2] + "_L"] = values
            else:
                chans[name] = values
        return GaitRecording(self.sample_rate, chans, self.body_mass, self.gravity,
                             self.condition, self.meta)


def concatenate_recordings(recs: Sequence[GaitRecording], condition: str | None = None) -> GaitRecording:
    """Join recordings end to end; join points are kept in ``meta['seams']``.

    Channels present in every input are kept. Analysis drops cycles that
    straddle a seam.
    """
    if not recs:
        raise GaitLabError("nothing to concatenate")
    first = recs[0]
    for r in recs[1:]:
        if r.sample_rate != first.sample_rate or r.body_mass != first.body_mass:
            raise GaitLabError("recordings differ in sample_rate or body_mass")
    names = [c for c in first.channels if all(c in r.channels for r in recs)]
    chans = {c: np.concatenate([r[c] for r in recs]) for c in names}
    seams = np.cumsum([r.n_samples for r in recs])[:-1]
    meta = dict(first.meta)
    meta["seams"] = ";".join(str(int(k)) for k in seams)
    meta["episodes"] = str(len(recs))
    return GaitRecording(first.sample_rate, chans, first.body_mass, first.gravity,
                         first.condition if condition is None else condition, meta)


def normalize_contact(rec: GaitRecording) -> GaitRecording:
    """Replace heel/toe contact channels with GRF divided by body weight."""
    bw = rec.body_weight
    updates = {}
    for s in SIDES:
        norm = rec[f"grf_{s}"] / bw
        updates[f"contact_heel_{s}"] = np.maximum(norm, 0.0)
        updates[f"contact_toe_{s}"] = np.maximum(norm, 0.0)
    return rec.with_channels(**updates)


# --------------------------------------------------------------------- CSV IO

def _parse_meta_line(line: str) -> dict[str, str]:
    body = line.lstrip("#").strip()
    meta = {}
    for tok in body.split():
        if "=" not in tok:
            raise GaitLabError(f"malformed metadata token {tok!r}")
        k, v = tok.split("=", 1)
        meta[k] = v
    return meta


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _recording_from_table(meta: dict[str, str], columns: list[str], rows: list[list[str]],
                          ) -> GaitRecording:
    for key in ("sample_rate", "body_mass"):
        if key not in meta:
            raise GaitLabError(f"metadata missing {key!r}")
    sample_rate = float(meta.pop("sample_rate"))
    body_mass = float(meta.pop("body_mass"))
    gravity = float(meta.pop("gravity", DEFAULT_GRAVITY))
    condition = meta.pop("condition", "").replace("_", " ")
    duration = meta.pop("duration", None)

    width = len(columns)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedSeries(f"row {i} has {len(row)} fields, expected {width}")
    data: dict[str, np.ndarray] = {}
    for j, name in enumerate(columns):
        if name == "time":
            continue
        col = np.array([float(r[j]) for r in rows], dtype=float)
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            raise NonFiniteSample(int(bad[0]), name)
        data[name] = col
    for name in REQUIRED_CHANNELS:
        if name not in data:
            raise MissingChannel(name)
    if duration is not None:
        expected = round(sample_rate * float(duration))
        if expected != len(rows):
            raise RaggedSeries(f"expected {expected} samples for duration {duration}, got {len(rows)}")
    return GaitRecording(sample_rate, data, body_mass, gravity, condition, meta)


def load_recording(path, format: str | None = None) -> GaitRecording:
    """Load a recording from CSV (canonical) or JSON.

    Row indices in ``NonFiniteSample`` are zero-based data rows.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if fmt == "json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        meta = {k: str(v) for k, v in doc.items() if k != "channels"}
        chans = doc.get("channels", {})
        columns = list(chans)
        lengths = {len(v) for v in chans.values()}
        if len(lengths) > 1:
            raise RaggedSeries(f"channel lengths differ: {sorted(lengths)}")
        n = lengths.pop() if lengths else 0
        rows = [[chans[c][i] for c in columns] for i in range(n)]
        # JSON null / "NaN" both end up non-finite
        rows = [[("nan" if v is None else v) for v in r] for r in rows]
        return _recording_from_table(meta, columns, rows)
    if fmt != "csv":
        raise GaitLabError(f"unsupported recording format {fmt!r}")

    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise GaitLabError("CSV must start with a '# key=value' metadata line")
    meta = _parse_meta_line(lines[0])
    columns = [c.strip() for c in lines[1].split(",")]
    rows = [[v.strip() for v in ln.split(",")] for ln in lines[2:] if ln.strip()]
    return _recording_from_table(meta, columns, rows)


def _ordered_columns(rec: GaitRecording) -> list[str]:
    extra = sorted(c for c in rec.channels if c not in REQUIRED_CHANNELS)
    return list(REQUIRED_CHANNELS) + extra


def _meta_header(rec: GaitRecording) -> str:
    items = {
        "sample_rate": _fmt(rec.sample_rate),
        "body_mass": _fmt(rec.body_mass),
        "gravity": _fmt(rec.gravity),
        "condition": rec.condition.replace(" ", "_") or "unlabeled",
    }
    items.update({k: str(v).replace(" ", "_") for k, v in rec.meta.items()})
    return "# " + " ".join(f"{k}={v}" for k, v in items.items())


def write_recording(rec: GaitRecording, path, format: str | None = None) -> Path:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    cols = _ordered_columns(rec)
    if fmt == "json":
        doc = {
            "sample_rate": rec.sample_rate,
            "body_mass": rec.body_mass,
            "gravity": rec.gravity,
            "condition": rec.condition,
            **dict(rec.meta),
            "channels": {c: rec[c].tolist() for c in cols},
        }
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path
    t = rec.time
    table = [t] + [rec[c] for c in cols]
    out = [_meta_header(rec), ",".join(["time"] + cols)]
    for i in range(rec.n_samples):
        out.append(",".join(_fmt(col[i]) for col in table))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------- reference gait

@dataclass(frozen=True)
class ReferenceTrajectory:
    """One periodic reference gait cycle sampled on a uniform phase grid.

    ``q_ref``/``qdot_ref`` are keyed by tracked joint (e.g. ``"knee_L"``);
    ``ee_ref`` by end-effector (``"toe_R"``) with shape ``(len(phase), 2)``
    holding pelvis-relative (x, z) in metres.
    """

    phase: np.ndarray
    q_ref: Mapping[str, np.ndarray]
    qdot_ref: Mapping[str, np.ndarray]
    ee_ref: Mapping[str, np.ndarray]
    cycle_period: float

    def __post_init__(self):
        phase = _frozen(self.phase)
        if phase.size < 2 or phase[0] != 0.0 or phase[-1] != 1.0:
            raise PhaseNotMonotone("phase grid must span [0, 1]")
        if np.any(np.diff(phase) <= 0):
            raise PhaseNotMonotone("phase grid must be strictly increasing")
        for j in TRACKED_JOINTS:
            if j not in self.q_ref or j not in self.qdot_ref:
                raise MissingJoint(j)
        object.__setattr__(self, "phase", phase)
        for name in ("q_ref", "qdot_ref", "ee_ref"):
            object.__setattr__(self, name, MappingProxyType(
                {k: _frozen(v) for k, v in getattr(self, name).items()}))

    def _table(self) -> np.ndarray:
        tab = self.__dict__.get("_tab")
        if tab is None:
            cols = [self.q_ref[j] for j in TRACKED_JOINTS] + [self.qdot_ref[j] for j in TRACKED_JOINTS]
            for k in END_EFFECTORS:
                ee = self.ee_ref.get(k)
                ee = np.full((len(self.phase), 2), np.nan) if ee is None else ee
                cols += [ee[:, 0], ee[:, 1]]
            tab = np.column_stack(cols)
            object.__setattr__(self, "_tab", tab)
        return tab

    def sample(self, phi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(q_ref, qdot_ref, ee_ref (4, 2)) at phase ``phi`` (wrapped to [0, 1))."""
        tab = self._table()
        phi = float(phi) % 1.0
        i = min(int(np.searchsorted(self.phase, phi, side="right")) - 1, len(self.phase) - 2)
        f = (phi - self.phase[i]) / (self.phase[i + 1] - self.phase[i])
        row = tab[i] + f * (tab[i + 1] - tab[i])
        return row[:6], row[6:12], row[12:].reshape(4, 2)

    def _interp(self, series: np.ndarray, phi: float):
        phi = phi % 1.0
        if series.ndim == 1:
            return float(np.interp(phi, self.phase, series))
        return np.array([np.interp(phi, self.phase, series[:, d]) for d in range(series.shape[1])])

    def joints_at(self, phi: float) -> tuple[np.ndarray, np.ndarray]:
        q = np.array([self._interp(self.q_ref[j], phi) for j in TRACKED_JOINTS])
        qd = np.array([self._interp(self.qdot_ref[j], phi) for j in TRACKED_JOINTS])
        return q, qd

    def ee_at(self, phi: float) -> np.ndarray:
        """(4, 2) pelvis-relative end-effector positions in END_EFFECTORS order."""
        return np.array([self._interp(self.ee_ref[k], phi) for k in END_EFFECTORS])


def phase_derivative(values: np.ndarray, phase: np.ndarray, cycle_period: float) -> np.ndarray:
    """Central differences in the interior, one-sided at the ends, per second."""
    return np.gradient(np.asarray(values, float), np.asarray(phase, float), edge_order=1) / cycle_period


def load_reference(path) -> ReferenceTrajectory:
    """Read a reference gait CSV (``# cycle_period=..`` header then ``phase, q_*, ...``)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = _parse_meta_line(lines[0]) if lines and lines[0].startswith("#") else {}
    body = lines[1:] if meta else lines
    columns = [c.strip() for c in body[0].split(",")]
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:] if ln.strip()])
    col = {c: data[:, i] for i, c in enumerate(columns)}
    if "phase" not in col:
        raise PhaseNotMonotone("reference has no phase column")
    phase = col["phase"]
    if np.any(np.diff(phase) <= 0):
        raise PhaseNotMonotone("phase column is not strictly increasing")
    period = float(meta.get("cycle_period", 1.0))
    q_ref, qdot_ref = {}, {}
    for j in TRACKED_JOINTS:
        if f"q_{j}" not in col:
            raise MissingJoint(j)
        q_ref[j] = col[f"q_{j}"]
        qdot_ref[j] = col.get(f"qdot_{j}", phase_derivative(col[f"q_{j}"], phase, period))
    ee_ref = {}
    for k in END_EFFECTORS:
        if f"{k}_x" in col and f"{k}_z" in col:
            ee_ref[k] = np.column_stack([col[f"{k}_x"], col[f"{k}_z"]])
    return ReferenceTrajectory(phase, q_ref, qdot_ref, ee_ref, period)


def write_reference(ref: ReferenceTrajectory, path) -> Path:
    path = Path(path)
    cols = ["phase"] + [f"q_{j}" for j in TRACKED_JOINTS] + [f"qdot_{j}" for j in TRACKED_JOINTS]
    series = [ref.phase] + [ref.q_ref[j] for j in TRACKED_JOINTS] + [ref.qdot_ref[j] for j in TRACKED_JOINTS]
    for k in END_EFFECTORS:
        if k in ref.ee_ref:
            cols += [f"{k}_x", f"{k}_z"]
            series += [ref.ee_ref[k][:, 0], ref.ee_ref[k][:, 1]]
    out = [f"# cycle_period={_fmt(ref.cycle_period)}", ",".join(cols)]
    for i in range(len(ref.phase)):
        out.append(",".join(_fmt(s[i]) for s in series))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
