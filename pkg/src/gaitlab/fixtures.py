"""Analytic gait recordings with known metrics, for oracle and golden tests.

Each fixture is built so that the analysis pipeline (event detection, cycle
windowing, stance extraction, normalization, ROM/SI/r, peak force) returns
prescribed values:

* contact channels are 0/1 plateaus, so heel strike and toe-off land on known
  samples and the toe-off percentage is an exact integer;
* the GRF of every stance is a two-sided sine bump whose maximum sits exactly
  on a sample, and the steady-state peaks are ``mean + sd * z`` with ``z``
  standardized (mean 0, sample SD 1);
* left stance angles follow ``(1 - cos 2 pi phi) / 2``; the right adds
  ``kappa * sin 2 pi phi`` with ``kappa`` bisected until the pipeline's
  correlation hits the target ``r``; both are scaled by their discrete range
  so the stance ROMs are exact and their SI equals the target.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import GaitLabError
from .events import N_POINTS, time_normalize
from .metrics import pearson, symmetry_index
from .recording import JOINTS, GaitRecording, write_recording

SAMPLE_RATE = 100.0
CYCLE_SAMPLES = 100
N_STRIKES = 12  # per side -> 11 complete cycles, the last 6 form the steady-state window
FIRST_STRIKE = 10
SIDE_OFFSET = CYCLE_SAMPLES // 2
BODY_MASS = 80.0
# left-side stance ROM (rad) and standing offset per joint
ROM_LEFT = {"ankle": 0.42, "knee": 0.38, "hip": 0.62}
OFFSET = {"ankle": -0.05, "knee": 0.08, "hip": 0.15}
SWING_DIP = {"ankle": -0.15, "knee": 0.9, "hip": 0.25}
# per-cycle amplitude wobble in the steady-state window; sums to zero
WOBBLE = np.array([0.012, -0.008, 0.004, -0.011, 0.009, -0.006])
PEAK_Z_RAW = np.array([-1.2, 0.4, 1.5, -0.3, 0.7, -1.1])


@dataclass(frozen=True)
class FixtureSpec:
    """Target values for one condition (the quantities a summary table row shows)."""

    condition: str
    peak_L: tuple[float, float]  # mean, SD in N
    peak_R: tuple[float, float]
    toe_off_L: int  # percent of the gait cycle
    toe_off_R: int
    joints: dict[str, tuple[float, float]]  # joint -> (SI %, r)


def _row(cond, pl, pr, tl, tr, ankle, knee, hip) -> FixtureSpec:
    return FixtureSpec(cond, pl, pr, tl, tr, {"ankle": ankle, "knee": knee, "hip": hip})


# Published summary metrics (Table I), one entry per condition.
TABLE1_ROWS: dict[int, FixtureSpec] = {
    1: _row("100% strength (α=1.0)", (1319.1, 90.3), (1422.4, 89.3), 57, 55,
            (6.4, 0.974), (-9.7, 0.988), (-4.9, 0.993)),
    2: _row("75% strength (α=0.75)", (1755.7, 112.1), (1165.4, 78.6), 62, 55,
            (-12.9, 0.961), (-19.8, 0.957), (0.2, 0.996)),
    3: _row("50% strength (α=0.5)", (1681.6, 130.5), (1053.3, 90.5), 60, 53,
            (-25.8, 0.948), (22.7, 0.914), (-7.0, 0.992)),
    4: _row("25% strength (α=0.25)", (1688.8, 93.3), (1002.0, 88.4), 61, 53,
            (-47.1, 0.889), (29.6, 0.841), (7.1, 0.949)),
    5: _row("50% strength + Exo (α=0.5)", (1686.3, 117.0), (878.6, 132.8), 60, 54,
            (-18.5, 0.966), (-12.0, 0.914), (4.1, 0.977)),
}
TABLE1_FILES = {1: "fixture_100pct", 2: "fixture_75pct", 3: "fixture_50pct", 4: "fixture_25pct",
                5: "fixture_50pct_exo"}

SYMMETRIC = _row("symmetric", (1200.0, 50.0), (1200.0, 50.0), 60, 60,
                 (0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


@dataclass
class Fixture:
    recording: GaitRecording
    truth: dict = field(default_factory=dict)

    def write(self, path) -> tuple[Path, Path]:
        path = Path(path)
        csv_path = write_recording(self.recording, path.with_suffix(".csv"))
        side = path.with_suffix(".truth.json")
        side.write_text(json.dumps(self.truth, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return csv_path, side


def _strikes(side: str) -> np.ndarray:
    first = FIRST_STRIKE + (SIDE_OFFSET if side == "R" else 0)
    return first + CYCLE_SAMPLES * np.arange(N_STRIKES)


def _base_shape(phi: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2 * np.pi * phi))


def _skew_shape(phi: np.ndarray) -> np.ndarray:
    return np.sin(2 * np.pi * phi)


def _stance_phase(stance: int) -> np.ndarray:
    return np.arange(stance + 1) / stance


def _pipeline_r(shape_l: np.ndarray, shape_r: np.ndarray, n: int = N_POINTS) -> float:
    return pearson(time_normalize(shape_l, n).values, time_normalize(shape_r, n).values)


def solve_kappa(target_r: float, stance_l: int, stance_r: int, tol: float = 1e-13) -> float:
    """Weight of the skew component giving correlation ``target_r`` after normalization."""
    left = _base_shape(_stance_phase(stance_l))
    phi_r = _stance_phase(stance_r)
    base_r, skew_r = _base_shape(phi_r), _skew_shape(phi_r)

    def r_of(k):
        return _pipeline_r(left, base_r + k * skew_r)

    r0 = r_of(0.0)
    if target_r > r0:
        if target_r - r0 < 1e-9 or target_r >= 1.0:
            return 0.0
        raise GaitLabError(f"target r {target_r} exceeds the attainable {r0}")
    lo, hi = 0.0, 1.0
    while r_of(hi) > target_r:
        hi *= 2
        if hi > 1e6:
            raise GaitLabError(f"target r {target_r} not attainable")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if r_of(mid) > target_r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _unit_range(x: np.ndarray) -> np.ndarray:
    """Shift to start at 0 and scale so max - min == 1 on the given samples."""
    return (x - x[0]) / (x.max() - x.min())


def _standardized(z: np.ndarray) -> np.ndarray:
    c = z - z.mean()
    return c / c.std(ddof=1)


def _grf_bump(stance: int, peak: float) -> np.ndarray:
    """Stance-long force bump with its maximum ``peak`` exactly at one sample."""
    kp = stance // 4
    k = np.arange(stance)
    rise = np.sin(0.5 * np.pi * (k + 1) / (kp + 1))
    fall = np.sin(0.5 * np.pi * (stance - k) / (stance - kp))
    out = np.where(k <= kp, rise, fall) * peak
    out[kp] = peak
    return out


def build_fixture(spec: FixtureSpec, n_points: int = N_POINTS, meta: dict | None = None) -> Fixture:
    n = int(_strikes("R")[-1] + CYCLE_SAMPLES)
    chans = {name: np.zeros(n) for name in (
        "grf_L", "grf_R", "contact_heel_L", "contact_heel_R", "contact_toe_L", "contact_toe_R")}
    truth: dict = {"condition": spec.condition, "sample_rate": SAMPLE_RATE, "events": {}, "joints": {},
                   "peak_force": {}, "toe_off_percent": {}, "stance_time": {}}
    toe = {"L": spec.toe_off_L, "R": spec.toe_off_R}
    stance = {s: toe[s] * CYCLE_SAMPLES // 100 for s in "LR"}
    n_window = math.ceil((N_STRIKES - 1) * 0.5)
    assert n_window == len(WOBBLE) == len(PEAK_Z_RAW)

    kappa = {j: solve_kappa(spec.joints[j][1], stance["L"], stance["R"], ) for j in JOINTS}
    rom = {}
    for j in JOINTS:
        si = spec.joints[j][0]
        rom_l = ROM_LEFT[j]
        rom[j] = (rom_l, rom_l * (200.0 - si) / (200.0 + si))

    for s, sign in (("L", 0), ("R", 1)):
        strikes = _strikes(s)
        S = stance[s]
        phi = _stance_phase(S)
        unit = {}
        for j in JOINTS:
            shape = _base_shape(phi) if s == "L" else _base_shape(phi) + kappa[j] * _skew_shape(phi)
            unit[j] = _unit_range(shape)
        q = {j: np.full(n, OFFSET[j]) for j in JOINTS}
        mean, sd = spec.peak_L if s == "L" else spec.peak_R
        z = _standardized(PEAK_Z_RAW)
        events, peaks = [], []
        for c, hs in enumerate(strikes):
            to = hs + S
            w = c - (N_STRIKES - 1 - n_window)  # index inside the steady-state window
            in_window = 0 <= w < n_window
            amp = 1.0 + (WOBBLE[w] if in_window else 0.0)
            peak = mean + sd * z[w] if in_window else mean
            hi = min(to, n)
            chans[f"contact_heel_{s}"][hs:hi] = 1.0
            chans[f"contact_toe_{s}"][hs:hi] = 1.0
            bump = _grf_bump(S, peak)
            chans[f"grf_{s}"][hs:hi] = bump[:hi - hs]
            events.append({"kind": "HeelStrike", "index": int(hs), "time": hs / SAMPLE_RATE})
            if to < n:
                events.append({"kind": "ToeOff", "index": int(to), "time": to / SAMPLE_RATE})
            nxt = hs + CYCLE_SAMPLES
            for j in JOINTS:
                seg = OFFSET[j] + amp * rom[j][sign] * unit[j]
                q[j][hs:min(to + 1, n)] = seg[:min(to + 1, n) - hs]
                # swing: smooth excursion from the toe-off value back to the offset
                if to + 1 < n:
                    m = nxt - to
                    psi = np.arange(1, m) / m
                    end_val = seg[-1]
                    swing = end_val + (OFFSET[j] - end_val) * psi + SWING_DIP[j] * np.sin(np.pi * psi)
                    stop = min(nxt, n)
                    q[j][to + 1:stop] = swing[:stop - to - 1]
            if in_window:
                peaks.append(peak)
        for j in JOINTS:
            chans[f"q_{j}_{s}"] = q[j]
        truth["events"][s] = events
        truth["peak_force"][s] = {"mean": mean, "sd": sd, "window_peaks": peaks}
        truth["toe_off_percent"][s] = toe[s]
        truth["stance_time"][s] = S / SAMPLE_RATE

    for j in JOINTS:
        si, r = spec.joints[j]
        truth["joints"][j] = {"si": si, "r": r, "rom_left": rom[j][0], "rom_right": rom[j][1],
                              "kappa": kappa[j], "si_check": symmetry_index(*rom[j])}
    truth["window_cycles"] = n_window
    truth["spec"] = asdict(spec)
    rec = GaitRecording(SAMPLE_RATE, chans, BODY_MASS, condition=spec.condition,
                        meta={"fixture": "true", **(meta or {})})
    return Fixture(rec, truth)


def table1_fixture(row: int) -> Fixture:
    if row not in TABLE1_ROWS:
        raise GaitLabError(f"table row must be one of {sorted(TABLE1_ROWS)}, got {row}")
    return build_fixture(TABLE1_ROWS[row], meta={"row": str(row)})


def symmetric_fixture() -> Fixture:
    return build_fixture(SYMMETRIC, meta={"kind": "symmetric"})


def weakness_sweep(ankle_si=(6.4, -12.9, -25.8, -47.1)) -> list[Fixture]:
    """One fixture per target ankle SI; other metrics follow the matching table rows.

    The targets must grow strictly in magnitude and stay inside (-200, 200).
    """
    mags = [abs(float(si)) for si in ankle_si]
    if not mags or any(m >= 200 for m in mags) or any(b <= a for a, b in zip(mags, mags[1:])):
        raise GaitLabError(f"sweep needs |SI| strictly increasing and below 200, got {list(ankle_si)}")
    out = []
    for k, si in enumerate(ankle_si):
        base = TABLE1_ROWS[min(k + 1, 4)]
        joints = dict(base.joints)
        joints["ankle"] = (float(si), base.joints["ankle"][1])
        spec = FixtureSpec(f"sweep {k + 1} (ankle SI {si:+.1f})", base.peak_L, base.peak_R,
                           base.toe_off_L, base.toe_off_R, joints)
        out.append(build_fixture(spec, meta={"kind": "weakness-sweep", "step": str(k + 1)}))
    return out
