"""Heel-strike / toe-off detection, gait-cycle segmentation and time normalization."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptySignal, NoCycles, NoEventsFound, OutOfRange, SegmentTooShort
from .recording import GaitRecording

EVENT_THRESHOLD = 0.05
STANCE_THRESHOLD = 0.1
MIN_SEPARATION = 0.3
N_POINTS = 100


class EventKind(str, enum.Enum):
    HEEL_STRIKE = "HeelStrike"
    TOE_OFF = "ToeOff"


class Side(str, enum.Enum):
    LEFT = "L"
    RIGHT = "R"

    @property
    def other(self) -> Side:
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


@dataclass(frozen=True)
class GaitEvent:
    kind: EventKind
    side: Side
    time: float
    sample_index: int


@dataclass(frozen=True)
class GaitCycle:
    """Heel strike to next same-side heel strike, with the intervening toe-off."""

    side: Side
    start: float
    toe_off: float
    end: float
    start_index: int
    toe_off_index: int
    end_index: int

    @property
    def stance_duration(self) -> float:
        return self.toe_off - self.start

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class NormalizedTrajectory:
    values: np.ndarray
    domain: str = "StancePhase"
    side: Side | None = None
    joint: str | None = None

    def __len__(self):
        return len(self.values)


class Segmentation(NamedTuple):
    cycles: list[GaitCycle]
    skipped: int


def _crossings(s: np.ndarray, threshold: float) -> list[tuple[EventKind, int]]:
    prev, cur = s[:-1], s[1:]
    up = np.flatnonzero((prev < threshold) & (cur >= threshold)) + 1
    down = np.flatnonzero((prev >= threshold) & (cur < threshold)) + 1
    out = [(EventKind.HEEL_STRIKE, int(i)) for i in up] + [(EventKind.TOE_OFF, int(i)) for i in down]
    out.sort(key=lambda e: e[1])
    return out


def detect_events(contact: Sequence[float], sample_rate: float,
                  threshold: float = EVENT_THRESHOLD, min_separation: float = MIN_SEPARATION,
                  side: Side = Side.LEFT) -> list[GaitEvent]:
    """Threshold-crossing events on one contact channel.

    Upward crossing (``s[i-1] < thr <= s[i]``) is a heel strike at ``i``,
    downward (``s[i-1] >= thr > s[i]``) a toe-off at ``i``. An event within
    ``min_separation`` of the previous kept event of the same kind is dropped;
    an event repeating the kind of the previous kept event is then dropped too,
    so the output alternates.
    """
    s = np.asarray(contact, dtype=float)
    if s.size == 0:
        raise EmptySignal("contact signal is empty")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    side = Side(side)
    kept: list[GaitEvent] = []
    last_time: dict[EventKind, float] = {}
    for kind, idx in _crossings(s, threshold):
        t = idx / sample_rate
        if kind in last_time and t - last_time[kind] < min_separation:
            continue
        if kept and kept[-1].kind is kind:
            continue
        kept.append(GaitEvent(kind, side, t, idx))
        last_time[kind] = t
    if not kept:
        raise NoEventsFound("contact signal never crosses the threshold")
    return kept


def recording_events(rec: GaitRecording, side: Side, threshold: float = EVENT_THRESHOLD,
                     min_separation: float = MIN_SEPARATION) -> list[GaitEvent]:
    """Heel strikes from the heel channel and toe-offs from the toe channel.

    Falls back to body-weight-normalized GRF when a contact channel is absent.
    """
    side = Side(side)
    s = side.value
    fallback = rec[f"grf_{s}"] / rec.body_weight

    heel = rec.channels.get(f"contact_heel_{s}", fallback)
    toe = rec.channels.get(f"contact_toe_{s}", fallback)
    found = []
    for signal, kind in ((heel, EventKind.HEEL_STRIKE), (toe, EventKind.TOE_OFF)):
        try:
            evs = detect_events(signal, rec.sample_rate, threshold, min_separation, side)
        except NoEventsFound:
            evs = []
        found += [e for e in evs if e.kind is kind]
    if not found:
        raise NoEventsFound(f"no gait events on side {s}")
    found.sort(key=lambda e: (e.sample_index, e.kind is EventKind.HEEL_STRIKE))
    return found


def segment_cycles(events: Sequence[GaitEvent], side: Side) -> Segmentation:
    side = Side(side)
    evs = [e for e in events if e.side is side]
    strikes = [i for i, e in enumerate(evs) if e.kind is EventKind.HEEL_STRIKE]
    cycles, skipped = [], 0
    for a, b in zip(strikes, strikes[1:]):
        toe_offs = [e for e in evs[a + 1:b] if e.kind is EventKind.TOE_OFF]
        if len(toe_offs) != 1:
            skipped += 1
            continue
        hs, to, nxt = evs[a], toe_offs[0], evs[b]
        if not hs.time < to.time < nxt.time:
            skipped += 1
            continue
        cycles.append(GaitCycle(side, hs.time, to.time, nxt.time,
                                hs.sample_index, to.sample_index, nxt.sample_index))
    return Segmentation(cycles, skipped)


def steady_state_window(cycles: Sequence[GaitCycle], last_fraction: float = 0.5) -> list[GaitCycle]:
    if not cycles:
        raise NoCycles("no gait cycles to window")
    if not 0 < last_fraction <= 1:
        raise ValueError("last_fraction must lie in (0, 1]")
    ordered = sorted(cycles, key=lambda c: c.start)
    k = math.ceil(len(ordered) * last_fraction)
    return ordered[-k:]


def joint_channel(joint: str, side: Side) -> str:
    return f"q_{joint}_{Side(side).value}"


def extract_stance(cycle: GaitCycle, rec: GaitRecording, joint: str) -> np.ndarray:
    """Joint-angle samples from heel strike to toe-off, both inclusive."""
    if cycle.start_index < 0 or cycle.end_index >= rec.n_samples:
        raise OutOfRange(f"cycle [{cycle.start}, {cycle.end}] s exceeds recording "
                         f"({rec.duration} s)")
    series = rec[joint_channel(joint, cycle.side)]
    return np.array(series[cycle.start_index:cycle.toe_off_index + 1])


def extract_cycle(cycle: GaitCycle, series: np.ndarray) -> np.ndarray:
    if cycle.end_index >= len(series):
        raise OutOfRange("cycle exceeds series")
    return np.asarray(series[cycle.start_index:cycle.end_index + 1], float)


def time_normalize(segment: Sequence[float], n: int = N_POINTS, *, domain: str = "StancePhase",
                   side: Side | None = None, joint: str | None = None) -> NormalizedTrajectory:
    """Resample to ``n`` points by linear interpolation; endpoints are kept exactly."""
    seg = np.asarray(segment, dtype=float)
    if seg.size < 2 or n < 2:
        raise SegmentTooShort(f"need >= 2 samples and n >= 2 (got {seg.size}, n={n})")
    m = seg.size - 1
    k = np.arange(n)
    pos = k * m / (n - 1)
    lo = np.minimum(np.floor(pos).astype(int), m - 1)
    frac = pos - lo
    out = seg[lo] + frac * (seg[lo + 1] - seg[lo])
    out[0] = seg[0]
    out[-1] = seg[-1]
    return NormalizedTrajectory(out, domain, side, joint)


def stance_ratio(contact: Sequence[float], threshold: float = STANCE_THRESHOLD) -> float:
    s = np.asarray(contact, dtype=float)
    if s.size == 0:
        raise EmptySignal("contact signal is empty")
    return float(np.count_nonzero(s >= threshold)) / s.size


def write_events(events: Sequence[GaitEvent], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["side", "kind", "time_s", "sample_index"])
        for e in sorted(events, key=lambda e: (e.time, e.side.value)):
            w.writerow([e.side.value, e.kind.value, repr(e.time), e.sample_index])
    return path
