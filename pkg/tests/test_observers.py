import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadcheck.observers import (OBSERVER_SOURCE, TABLE_COLUMNS, EpisodeMetrics, ObserverParams, aggregate_runs,
                                 axis_records, axis_trace, build_observers, episode_metrics)
from quadcheck.stl import Evaluator, Trace

import oracles as O

PARAMS = ObserverParams()


def records(sampled, params=PARAMS, horizon=None):
    times, x, q = sampled
    tr = axis_trace(times, x, q)
    return axis_records("p", tr, params, build_observers(params), horizon or times[-1])


def test_params_validation():
    with pytest.raises(ValueError):
        ObserverParams(T1=0.6)
    with pytest.raises(ValueError):
        ObserverParams(alpha=0)
    assert ObserverParams.from_dict({"alpha": 0.2}).alpha == 0.2


def test_source_is_plain_definitions():
    spec = build_observers(PARAMS, episode_length=20)
    for name in ("stable", "becomesstable", "up", "down", "stepsize", "overshoot_up", "overshoot_down",
                 "offset", "rising_time", "G_overshoot", "G_offset"):
        assert name in spec
    assert "becomesstable" in OBSERVER_SOURCE


def test_perfect_tracking():
    [r] = records(O.perfect_response())
    assert r.time == O.STEP_AT and r.step == O.STEP
    assert (r.overshoot, r.offset, r.rising_time) == (0, 0, 0)
    assert r.ok_overshoot and r.ok_offset and r.ok_rising


def test_first_order_response():
    [r] = records(O.first_order_response())
    assert r.rising_time == pytest.approx(O.first_order_rising_time(), abs=1e-9)
    assert r.overshoot == 0
    assert r.offset == pytest.approx(100 * math.exp(-5), abs=1e-9)
    assert r.ok_overshoot and r.ok_offset and r.ok_rising


def test_overshoot_pulse_threshold():
    [r10] = records(O.overshoot_pulse(), ObserverParams(alpha=0.10))
    [r15] = records(O.overshoot_pulse(), ObserverParams(alpha=0.15))
    assert r10.overshoot == pytest.approx(12.0, abs=1e-9)
    assert not r10.ok_overshoot and r15.ok_overshoot
    assert r10.rising_time == pytest.approx(0.1, abs=1e-9)


def test_three_plateau_golden():
    recs = records(O.three_plateaus())
    assert len(recs) == 3
    for r, (step, ov, off, rt) in zip(recs, O.THREE_PLATEAU_GOLDEN):
        assert r.step == pytest.approx(step, abs=1e-12)
        assert r.overshoot == pytest.approx(ov, abs=1e-9)
        assert r.offset == pytest.approx(off, abs=1e-9)
        assert r.rising_time == pytest.approx(rt, abs=1e-9) if math.isfinite(rt) else r.rising_time == rt
    assert [r.ok_overshoot for r in recs] == [True, False, True]
    assert [r.ok_offset for r in recs] == [True, False, True]
    assert [r.ok_rising for r in recs] == [True, False, True]
    s = EpisodeMetrics(recs).summary()
    assert s["ok_rising"] == pytest.approx(200 / 3)
    assert s["avg_rising"] == pytest.approx(0.1) and s["max_rising"] == pytest.approx(0.2)
    ovs = [g[1] for g in O.THREE_PLATEAU_GOLDEN]
    assert s["avg_overshoot"] == pytest.approx(sum(ovs) / 3) and s["max_overshoot"] == pytest.approx(max(ovs))


def test_two_plateaus_offset_count():
    recs = records(O.three_plateaus())[:2]
    assert EpisodeMetrics(recs).summary()["ok_offset"] == 50


def test_empty_episode_is_nan_not_zero():
    times, x, q = O.sampled(lambda t: 0.0, lambda t: 0.0, 0.3)
    m = episode_metrics(Trace.from_columns(times, {a: x for a in ("p", "q", "r")} |
                                           {f"{a}_sp": q for a in ("p", "q", "r")}))
    assert m.empty
    assert all(math.isnan(m.summary()[c]) for c in TABLE_COLUMNS)


def test_zero_step_plateau_excluded_from_ratios():
    # a 5 ms spike: at its end q equals its value epsilon earlier, yet the plateau is new
    times, vals = [0.0, 1.0, 1.005], [0.1, 0.3, 0.1]
    recs = records((times, vals, vals), horizon=2.0)
    zero = [r for r in recs if r.step == 0]
    assert len(zero) == 1 and zero[0].time == 1.005
    assert math.isnan(zero[0].overshoot) and math.isnan(zero[0].offset)
    s = EpisodeMetrics(zero).summary()
    assert math.isnan(s["ok_overshoot"]) and math.isnan(s["ok_offset"])
    assert s["ok_rising"] == 100


def test_invariants_on_three_plateaus():
    times, x, q = O.three_plateaus()
    tr = axis_trace(times, x, q)
    spec = build_observers(PARAMS)
    ev = Evaluator(tr)
    for t in times:
        bs = ev.sat(spec["becomesstable"], t)
        if not bs:
            assert ev.term(spec["stepsize"], t) == 0
            assert ev.term(spec["rising_time"], t) == math.inf
        else:
            assert ev.sat(spec["up"], t) or ev.sat(spec["down"], t)


@given(st.floats(0.25, 4.0))
def test_flags_invariant_under_scaling(c):
    times, x, q = O.three_plateaus()
    base = records((times, x, q))
    scaled = records((times, [c * v for v in x], [c * v for v in q]), ObserverParams(d=PARAMS.d * c))
    assert [(r.ok_overshoot, r.ok_offset, r.ok_rising) for r in base] == \
        [(r.ok_overshoot, r.ok_offset, r.ok_rising) for r in scaled]


def _fake_summary(rng):
    s = {c: float(rng.uniform(0, 100)) for c in TABLE_COLUMNS}
    s["plateaus"] = int(rng.integers(1, 30))
    if rng.random() < 0.2:
        s["avg_rising"] = s["max_rising"] = math.nan
    return s


def test_aggregate_runs():
    recs = records(O.three_plateaus())
    one = EpisodeMetrics(recs)
    agg = aggregate_runs([one, one, one])
    for c in TABLE_COLUMNS:
        assert agg[c] == pytest.approx(one.summary()[c])
    assert aggregate_runs([{"ok_offset": 0.0, **{c: 1.0 for c in TABLE_COLUMNS if c != "ok_offset"}, "plateaus": 1},
                           {"ok_offset": 100.0, **{c: 1.0 for c in TABLE_COLUMNS if c != "ok_offset"},
                            "plateaus": 1}])["ok_offset"] == 50
    with pytest.raises(ValueError):
        aggregate_runs([])


def test_aggregate_matches_spreadsheet_recomputation():
    rng = np.random.default_rng(9)
    runs = [_fake_summary(rng) for _ in range(100)]
    agg = aggregate_runs(runs)
    for c in TABLE_COLUMNS:
        col = [r[c] for r in runs if not math.isnan(r[c])]
        assert abs(agg[c] - math.fsum(col) / len(col)) <= 1e-12 * max(1.0, abs(agg[c]))
    assert agg["plateaus"] == sum(r["plateaus"] for r in runs)


def test_detail_csv(tmp_path):
    m = EpisodeMetrics(records(O.three_plateaus()))
    m.write_detail_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0].startswith("axis,time,setpoint,step") and len(lines) == 4
