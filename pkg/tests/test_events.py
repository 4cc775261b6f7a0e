import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitlab.errors import EmptySignal, NoCycles, NoEventsFound, OutOfRange, SegmentTooShort
from gaitlab.events import (
    EVENT_THRESHOLD,
    MIN_SEPARATION,
    N_POINTS,
    STANCE_THRESHOLD,
    EventKind,
    GaitCycle,
    GaitEvent,
    Side,
    detect_events,
    extract_stance,
    recording_events,
    segment_cycles,
    stance_ratio,
    steady_state_window,
    time_normalize,
    write_events,
)

from oracles import scan_events


def test_defaults():
    assert (EVENT_THRESHOLD, STANCE_THRESHOLD, MIN_SEPARATION, N_POINTS) == (0.05, 0.1, 0.3, 100)


def test_single_stance_pulse():
    s = np.zeros(100)
    s[20:60] = 1.0
    evs = detect_events(s, 100.0)
    assert [(e.kind, e.sample_index) for e in evs] == [(EventKind.HEEL_STRIKE, 20), (EventKind.TOE_OFF, 60)]
    assert evs[0].time == pytest.approx(0.2)


def test_threshold_boundary_counts_as_contact():
    s = np.array([0.0, 0.05, 0.05, 0.0])
    assert [e.kind for e in detect_events(s, 100.0)] == [EventKind.HEEL_STRIKE, EventKind.TOE_OFF]


def test_chatter_is_debounced_per_kind():
    s = np.zeros(200)
    s[50:120] = 1.0
    s[55] = 0.0  # 10 ms dropout inside stance
    evs = detect_events(s, 100.0)
    # the dropout's toe-off survives (a strike never suppresses a toe-off), the re-strike at 56
    # is within 300 ms of the first strike, and the real toe-off at 120 would repeat a kind
    assert [(e.kind.value, e.sample_index) for e in evs] == [("HeelStrike", 50), ("ToeOff", 55)]


def test_second_strike_within_window_dropped():
    s = np.zeros(100)
    s[10:15] = 1.0
    s[35:60] = 1.0  # strikes 0.25 s apart
    evs = detect_events(s, 100.0)
    assert [(e.kind.value, e.sample_index) for e in evs] == [("HeelStrike", 10), ("ToeOff", 15)]


def test_no_crossing_raises():
    with pytest.raises(NoEventsFound):
        detect_events(np.ones(50), 100.0)
    with pytest.raises(EmptySignal):
        detect_events([], 100.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 60), st.sampled_from([0.0, 0.02, 0.0499, 0.05, 0.3, 1.0])),
                min_size=2, max_size=40),
       st.sampled_from([50.0, 100.0, 200.0]))
def test_matches_scanner(runs, fs):
    s = np.concatenate([np.full(n, v) for n, v in runs])
    want = scan_events(s, fs)
    if not want:
        with pytest.raises(NoEventsFound):
            detect_events(s, fs)
        return
    got = [("HS" if e.kind is EventKind.HEEL_STRIKE else "TO", e.sample_index) for e in detect_events(s, fs)]
    assert got == want


def _cycle(start, to, end):
    return GaitCycle(Side.LEFT, start / 100, to / 100, end / 100, start, to, end)


def test_segment_requires_one_toe_off():
    ev = [GaitEvent(EventKind.HEEL_STRIKE, Side.LEFT, 0.1, 10), GaitEvent(EventKind.TOE_OFF, Side.LEFT, 0.7, 70),
          GaitEvent(EventKind.HEEL_STRIKE, Side.LEFT, 1.1, 110), GaitEvent(EventKind.HEEL_STRIKE, Side.LEFT, 2.1, 210),
          GaitEvent(EventKind.TOE_OFF, Side.LEFT, 2.7, 270), GaitEvent(EventKind.HEEL_STRIKE, Side.LEFT, 3.1, 310)]
    seg = segment_cycles(ev, Side.LEFT)
    assert seg.skipped == 1
    assert [(c.start_index, c.toe_off_index, c.end_index) for c in seg.cycles] == [(10, 70, 110), (210, 270, 310)]
    assert seg.cycles[0].stance_duration == pytest.approx(0.6)
    assert segment_cycles(ev, Side.RIGHT).cycles == []


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (3, 2), (11, 6)])
def test_window_keeps_trailing_half_rounded_up(n, k):
    cycles = [_cycle(100 * i, 100 * i + 60, 100 * i + 100) for i in range(n)]
    kept = steady_state_window(cycles[::-1])
    assert len(kept) == k
    assert kept[-1].start_index == 100 * (n - 1)


def test_window_errors():
    with pytest.raises(NoCycles):
        steady_state_window([])
    with pytest.raises(ValueError):
        steady_state_window([_cycle(0, 60, 100)], 0.0)


def test_extract_stance_inclusive(symmetric_recording):
    c = _cycle(10, 70, 110)
    seg = extract_stance(c, symmetric_recording, "knee")
    assert len(seg) == 61
    assert seg[0] == symmetric_recording["q_knee_L"][10] and seg[-1] == symmetric_recording["q_knee_L"][70]
    with pytest.raises(OutOfRange):
        extract_stance(_cycle(10, 70, 10_000), symmetric_recording, "knee")


def test_recording_events_alternate(symmetric_recording):
    evs = recording_events(symmetric_recording, Side.RIGHT)
    kinds = [e.kind for e in evs]
    assert all(a is not b for a, b in zip(kinds, kinds[1:]))
    assert all(e.side is Side.RIGHT for e in evs)


def test_time_normalize_endpoints_and_length():
    out = time_normalize([3.0, -1.0, 7.5])
    assert len(out) == 100 and out.values[0] == 3.0 and out.values[-1] == 7.5
    np.testing.assert_array_equal(time_normalize([1.0, 2.0], n=2).values, [1.0, 2.0])
    with pytest.raises(SegmentTooShort):
        time_normalize([1.0])


def test_time_normalize_hits_original_samples():
    seg = np.random.default_rng(1).normal(size=34)  # 33 intervals map onto 99 output steps
    out = time_normalize(seg, n=100).values
    np.testing.assert_array_equal(out[::3], seg)


def test_stance_ratio():
    assert stance_ratio([0, 0.1, 0.5, 0.09]) == 0.5
    with pytest.raises(EmptySignal):
        stance_ratio([])


def test_write_events(tmp_path):
    ev = [GaitEvent(EventKind.TOE_OFF, Side.LEFT, 0.7, 70), GaitEvent(EventKind.HEEL_STRIKE, Side.LEFT, 0.1, 10)]
    lines = write_events(ev, tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "side,kind,time_s,sample_index"
    assert lines[1].startswith("L,HeelStrike,0.1,10")
