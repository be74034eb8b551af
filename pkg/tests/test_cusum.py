import itertools
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moodpulse.changepoint import (
    BOCPD,
    CUSUM,
    ChangePoint,
    DetectorConfig,
    cusum_detect,
    cusum_statistic,
    cusum_window,
    detect_series,
    merge_changepoints,
    shift_posterior,
    task_seed,
)
from moodpulse.errors import ConfigError, InsufficientDataError
from moodpulse.series import DailyAffectSeries

D0 = date(2021, 1, 1)


def _series(values, cat="anger"):
    n = len(values)
    return DailyAffectSeries(cat, D0, np.asarray(values, float), np.full(n, 50), np.zeros(n, bool))


def _range(x):
    s = np.cumsum(np.asarray(x, float) - np.mean(x))
    return s.max() - s.min()


def test_statistic_definition():
    x = [1.0, 2.0, 3.0, 6.0]
    assert cusum_statistic(x).tolist() == [-2.0, -3.0, -3.0, 0.0]


def test_exhaustive_permutations_of_step_miniature():
    x = (0, 0, 0, 1, 1, 1)
    observed = _range(x)
    arrangements = sorted(set(itertools.permutations(x)))
    assert len(arrangements) == 20
    assert max(_range(p) for p in arrangements) == observed
    # the range of the CUSUM bridge is invariant under cyclic rotation, so
    # the six rotations of the step tie with it and the other 14 fall below
    ties = [p for p in arrangements if _range(p) == observed]
    rotations = {x[i:] + x[:i] for i in range(len(x))}
    assert set(ties) == rotations
    exact = sum(_range(p) < observed for p in arrangements) / len(arrangements)
    assert exact == 14 / 20
    res = cusum_window(x, bootstrap_iters=20000, rng_seed=0)
    assert res.k == 3 and res.direction == "increase"
    assert abs(res.confidence - exact) < 0.01


def test_long_step_has_negligible_ties():
    # 28 rotations among C(28, 14) distinct arrangements
    from math import comb
    assert 28 / comb(28, 14) < 1e-5


def test_noiseless_step_window():
    res = cusum_window([0.1] * 14 + [0.2] * 14, bootstrap_iters=1000, rng_seed=4)
    assert res.k == 14
    assert res.confidence >= 1.0 - 1 / 1000
    assert res.direction == "increase"


def test_constant_window_has_zero_confidence():
    assert cusum_window([0.3] * 28).confidence == 0.0


def test_window_errors():
    with pytest.raises(InsufficientDataError):
        cusum_window([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        cusum_window([1.0, np.nan, 2.0, 3.0])


def test_ties_pick_smallest_index():
    # |S_k| peaks at k = 1 and k = 3 with equal magnitude
    assert cusum_window([1.0, 0.0, 1.0, 0.0], 10).k == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=30).filter(lambda v: np.ptp(v) > 1e-3),
       st.sampled_from([0.25, 0.5, 2.0, 8.0]), st.sampled_from([0.0, 0.05, -3.0, 10.0]))
def test_window_affine_invariance(values, a, b):
    # windows whose spread is far above rounding level; a spread of 1e-12
    # next to an offset of 10 is not representable in doubles
    x = np.array(values)
    base = cusum_window(x, 200, 11)
    moved = cusum_window(a * x + b, 200, 11)
    assert (moved.k, moved.confidence, moved.direction) == (base.k, base.confidence, base.direction)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=30), st.sampled_from([0.5, 2.0]),
       st.sampled_from([0.0, 0.05, 1.0]))
def test_shift_posterior_affine_invariance(values, a, b):
    x = np.array(values)
    p, loc = shift_posterior(x)
    q, loc2 = shift_posterior(a * x + b)
    assert 0.0 <= p <= 1.0
    if np.ptp(x) > 1e-6:
        assert q == pytest.approx(p, abs=1e-9)
        np.testing.assert_allclose(loc2, loc, atol=1e-9)


def test_noiseless_step_series():
    x = [0.1] * 60 + [0.2] * 60
    cps = cusum_detect(_series(x), DetectorConfig())
    assert len(cps) == 1
    assert cps[0].date == D0 + timedelta(days=60)
    assert cps[0].confidence >= 0.99 and cps[0].direction == "increase"


def test_constant_series_no_detection():
    assert cusum_detect(_series([0.15] * 120), DetectorConfig()) == []


def test_two_steps():
    x = [0.1] * 40 + [0.2] * 40 + [0.1] * 40
    cps = cusum_detect(_series(x), DetectorConfig())
    assert [p.date for p in cps] == [D0 + timedelta(days=40), D0 + timedelta(days=80)]
    assert [p.direction for p in cps] == ["increase", "decrease"]


def test_series_shorter_than_window():
    with pytest.raises(InsufficientDataError):
        cusum_detect(_series([0.1] * 20), DetectorConfig())


def test_noise_rarely_alarms():
    alarms = 0
    for seed in range(20):
        x = np.random.default_rng(seed).normal(0.1, 0.01, 120)
        alarms += len(cusum_detect(_series(x), DetectorConfig()))
    assert alarms <= 2


def _cp(day, method, conf, cat="anger"):
    return ChangePoint(cat, D0 + timedelta(days=day), method, conf, "increase")


def test_merge_examples():
    cfg = DetectorConfig()
    merged = merge_changepoints([_cp(40, CUSUM, 0.6)], [_cp(41, BOCPD, 0.7)], cfg)
    assert merged == [_cp(41, BOCPD, 0.7)]
    assert merge_changepoints([], [], cfg) == []
    assert merge_changepoints([_cp(40, CUSUM, 0.4)], [], cfg) == []


def test_merge_tie_prefers_cusum_and_keeps_categories_apart():
    cfg = DetectorConfig()
    merged = merge_changepoints([_cp(40, CUSUM, 0.8)], [_cp(39, BOCPD, 0.8)], cfg)
    assert merged == [_cp(40, CUSUM, 0.8)]
    other = merge_changepoints([_cp(40, CUSUM, 0.8)], [_cp(40, BOCPD, 0.9, cat="fear")], cfg)
    assert len(other) == 2


_points = st.lists(st.tuples(st.integers(0, 30), st.sampled_from([CUSUM, BOCPD]), st.floats(0, 1),
                             st.sampled_from(["anger", "fear"])), max_size=15)


@settings(max_examples=200, deadline=None)
@given(_points)
def test_merge_output_invariants(raw):
    cfg = DetectorConfig()
    pts = [_cp(d, m, c, cat) for d, m, c, cat in raw]
    out = merge_changepoints([p for p in pts if p.method == CUSUM], [p for p in pts if p.method == BOCPD], cfg)
    assert all(p.confidence >= cfg.confidence_threshold for p in out)
    assert out == sorted(out, key=lambda p: (p.date, p.category, p.method))
    for p, q in itertools.combinations(out, 2):
        if p.category == q.category:
            assert abs((p.date - q.date).days) > cfg.merge_window_days


def test_per_category_independence():
    rng = np.random.default_rng(5)
    x = np.r_[rng.normal(0.1, 0.01, 60), rng.normal(0.16, 0.01, 60)]
    cfg = DetectorConfig(rng_seed=9)
    alone = detect_series(_series(x, "anger"), cfg)
    # running another category first changes nothing for anger
    detect_series(_series(rng.normal(0.3, 0.05, 120), "fear"), cfg)
    assert detect_series(_series(x, "anger"), cfg) == alone


def test_task_seed_differs_by_category_and_is_stable():
    assert task_seed(0, "anger") != task_seed(0, "fear")
    assert task_seed(3, "anger") == task_seed(3, "anger")


def test_config_validation():
    with pytest.raises(ConfigError):
        DetectorConfig(window_days=5, stride_days=3)
    with pytest.raises(ConfigError):
        DetectorConfig(confidence_threshold=1.5)
    with pytest.raises(ConfigError):
        DetectorConfig(hazard=0.0)


def test_changepoint_json_roundtrip():
    p = ChangePoint("anger", D0, CUSUM, 0.123456789, "increase")
    d = p.to_json()
    assert d == {"category": "anger", "date": "2021-01-01", "method": "CUSUM",
                 "confidence": 0.123457, "direction": "increase"}
    assert ChangePoint.from_json(d).date == D0
