import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitlab.errors import BothZero, EmptySeries, NoCycles, NonPositiveDuration, SchemaMismatch, ZeroVariance
from gaitlab.events import GaitCycle, Side
from gaitlab.fixtures import TABLE1_FILES, TABLE1_ROWS
from gaitlab.metrics import (
    SCHEMA_VERSION,
    AnalysisConfig,
    SummaryRow,
    condition_summary,
    mean_sd,
    pearson,
    peak_force_stats,
    rom,
    stance_asymmetry,
    symmetry_index,
    toe_off_percent,
    trajectory_correlation,
)
from gaitlab.recording import concatenate_recordings

from oracles import pearson_two_pass

positive = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


def test_hand_values():
    assert stance_asymmetry(0.66, 0.54) == pytest.approx(0.2, abs=1e-12)
    assert symmetry_index(0.3, 0.2) == pytest.approx(40.0, abs=1e-12)
    assert symmetry_index(0.2, 0.3) == pytest.approx(-40.0, abs=1e-12)
    assert symmetry_index(0.0, 1.0) == -200.0


def test_domain_errors():
    with pytest.raises(NonPositiveDuration):
        stance_asymmetry(0.0, 0.5)
    with pytest.raises(BothZero):
        symmetry_index(0.0, 0.0)
    with pytest.raises(ValueError):
        symmetry_index(-0.1, 0.2)
    with pytest.raises(EmptySeries):
        rom([])
    with pytest.raises(EmptySeries):
        rom([0.0, math.nan])
    with pytest.raises(ZeroVariance):
        pearson([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        pearson([1.0, 2.0], [1.0, 2.0, 3.0])


@settings(max_examples=300)
@given(positive, positive)
def test_si_antisymmetric_and_bounded(a, b):
    assert symmetry_index(a, b) == -symmetry_index(b, a)
    assert abs(symmetry_index(a, b)) <= 200.0


@settings(max_examples=300)
@given(positive, positive, st.floats(1e-3, 1e3))
def test_stance_asymmetry_scale_invariant(a, b, k):
    assert stance_asymmetry(k * a, k * b) == pytest.approx(stance_asymmetry(a, b), abs=1e-12)


def test_rom():
    assert rom([0.1, -0.3, 0.4]) == pytest.approx(0.7)


def test_pearson_matches_two_pass(rng):
    for _ in range(50):
        x = rng.normal(size=100)
        y = 0.3 * x + rng.normal(size=100)
        assert pearson(x, y) == pytest.approx(pearson_two_pass(x.tolist(), y.tolist()), abs=1e-12)


def test_pearson_exact_extremes(rng):
    x = rng.normal(size=100)
    assert trajectory_correlation(x, x) == 1.0
    assert trajectory_correlation(x, -x) == -1.0


def test_toe_off_and_force_stats():
    c = GaitCycle(Side.LEFT, 1.0, 1.6, 2.0, 100, 160, 200)
    assert toe_off_percent(c) == pytest.approx(60.0)
    grf = np.zeros(300)
    grf[150], grf[250] = 900.0, 1100.0
    c2 = GaitCycle(Side.LEFT, 2.0, 2.6, 2.99, 200, 260, 299)
    st_ = peak_force_stats([c, c2], grf)
    assert (st_.mean, st_.n) == (1000.0, 2)
    assert st_.sd == pytest.approx(math.sqrt(2) * 100.0)  # N-1 denominator
    assert str(mean_sd([1.0])) == "1.0±0.0"
    with pytest.raises(NoCycles):
        peak_force_stats([], grf)


@pytest.mark.parametrize("row", sorted(TABLE1_FILES))
def test_fixture_reproduces_truth(row, table1_recordings, data_dir):
    truth = json.loads((data_dir / f"{TABLE1_FILES[row]}.truth.json").read_text(encoding="utf-8"))
    s = condition_summary(table1_recordings[row])
    spec = TABLE1_ROWS[row]
    assert s.n_cycles_L == s.n_cycles_R == truth["window_cycles"]
    for j, (si, r) in spec.joints.items():
        assert round(s.joints[j].si, 1) == si
        assert round(s.joints[j].r, 3) == r
        assert s.joints[j].rom_left == pytest.approx(truth["joints"][j]["rom_left"], abs=1e-12)
        assert s.joints[j].rom_right == pytest.approx(truth["joints"][j]["rom_right"], abs=1e-12)
    assert round(s.peak_force_L.mean, 1) == spec.peak_L[0] and round(s.peak_force_L.sd, 1) == spec.peak_L[1]
    assert round(s.peak_force_R.mean, 1) == spec.peak_R[0] and round(s.peak_force_R.sd, 1) == spec.peak_R[1]
    assert s.toe_off_L == pytest.approx(spec.toe_off_L) and s.toe_off_R == pytest.approx(spec.toe_off_R)
    assert s.stance_time_L == pytest.approx(truth["stance_time"]["L"])


def test_symmetric_fixture(symmetric_recording):
    s = condition_summary(symmetric_recording)
    for j in s.joints.values():
        assert abs(j.si) < 1e-9 and j.r == pytest.approx(1.0, abs=1e-12)
    assert s.stance_asym == pytest.approx(0.0, abs=1e-12)


def test_mirroring_flips_signs(table1_recordings):
    rec = table1_recordings[3]
    a, b = condition_summary(rec), condition_summary(rec.mirrored())
    for j in a.joints:
        assert b.joints[j].si == pytest.approx(-a.joints[j].si, abs=1e-9)
    assert b.peak_force_L.mean == pytest.approx(a.peak_force_R.mean)


def test_per_cycle_si_mode(table1_recordings):
    s = condition_summary(table1_recordings[1], AnalysisConfig(si_mode="per-cycle"))
    assert s.joints["ankle"].si == pytest.approx(6.4, abs=0.5)
    with pytest.raises(Exception):
        AnalysisConfig.from_dict({"si_mode": "median"})
    with pytest.raises(Exception):
        AnalysisConfig.from_dict({"bogus": 1})


def test_seam_cycles_dropped(table1_recordings):
    rec = table1_recordings[1]
    joined = concatenate_recordings([rec, rec])
    s = condition_summary(joined)
    assert s.skipped_L > 0 or s.skipped_R > 0
    assert round(s.joints["ankle"].si, 1) == 6.4


def test_summary_dict_roundtrip(table1_recordings):
    s = condition_summary(table1_recordings[5])
    d = json.loads(json.dumps(s.to_dict()))
    assert d["schema_version"] == SCHEMA_VERSION
    assert SummaryRow.from_dict(d) == s
    d["schema_version"] = 99
    with pytest.raises(SchemaMismatch):
        SummaryRow.from_dict(d)


def test_stage_tagged_on_failure():
    from gaitlab.recording import GaitRecording, REQUIRED_CHANNELS
    from gaitlab.errors import GaitLabError

    chans = {c: np.zeros(300) for c in REQUIRED_CHANNELS}
    with pytest.raises(GaitLabError) as exc:
        condition_summary(GaitRecording(100.0, chans, 70.0))
    assert exc.value.stage is not None
