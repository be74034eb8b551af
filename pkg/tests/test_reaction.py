from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from oracles import ols_oracle, pooled_oracle, welch_oracle
from moodpulse.errors import InsufficientDataError, RankDeficientError
from moodpulse.reaction import (
    format_pct,
    its_design,
    long_term_change,
    ols_fit,
    pooled_ttest,
    short_term_change,
    stars,
    welch_ttest,
)
from moodpulse.series import DailyAffectSeries

CP = date(2021, 4, 10)
BASELINE = [0.10, 0.12, 0.11, 0.09, 0.10, 0.11, 0.12]
POST = [0.15, 0.14, 0.16, 0.15, 0.15]


def _series_around(window, first_offset=-7, pad=0):
    """Series whose day ``first_offset`` relative to CP holds window[0]."""
    values = np.r_[np.full(pad, window[0]), window, np.full(pad, window[-1])]
    start = CP + timedelta(days=first_offset - pad)
    n = len(values)
    return DailyAffectSeries("anger", start, values, np.full(n, 100), np.zeros(n, bool))


def _its_y(beta):
    return its_design() @ np.asarray(beta, dtype=float)


def test_design_columns():
    X = its_design()
    assert X.shape == (11, 4)
    assert X[:, 2].tolist() == [0] * 7 + [1] * 4
    assert X[:, 3].tolist() == [0] * 7 + [7, 8, 9, 10]


def test_noiseless_recovery():
    beta = np.array([0.1, 0.01, 0.05, 0.02])
    fit = ols_fit(its_design(), _its_y(beta))
    assert np.max(np.abs(fit.beta - beta)) < 1e-10
    ref, _, _ = ols_oracle(its_design(), _its_y(beta))
    assert np.max(np.abs(ref - beta)) < 1e-10


def test_constant_series_fit():
    fit = ols_fit(its_design(), np.full(11, 0.3))
    assert_allclose(fit.beta, [0.3, 0, 0, 0], atol=1e-14)
    assert fit.p_values[3] == 1.0


@pytest.mark.parametrize("seed", range(200))
def test_ols_matches_normal_equation_oracle(seed):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(11), rng.normal(size=(11, 3))])
    y = X @ rng.normal(size=4) + rng.normal(scale=rng.uniform(0.01, 2), size=11)
    fit = ols_fit(X, y)
    beta, se, pv = ols_oracle(X, y)
    assert np.max(np.abs(fit.beta - beta)) < 1e-9
    assert_allclose(fit.std_err, se, rtol=1e-9)
    assert np.max(np.abs(fit.p_values - pv)) < 1e-6
    resid = y - X @ fit.beta
    assert np.max(np.abs(X.T @ resid)) < 1e-8 * np.linalg.norm(X) * np.linalg.norm(y)
    assert fit.dof == 7


def test_rank_deficient_names_columns():
    X = its_design()
    X = np.column_stack([X[:, :3], X[:, 2] * 2])
    with pytest.raises(RankDeficientError) as info:
        ols_fit(X, np.arange(11.0))
    assert info.value.columns == ["t_after"]


def test_too_few_rows():
    with pytest.raises(InsufficientDataError):
        ols_fit(its_design()[:4], np.arange(4.0))


def test_flat_window():
    st_ = short_term_change(_series_around(np.full(11, 0.2)), CP)
    assert st_.pct_change == pytest.approx(0.0, abs=1e-12)
    assert st_.p_value == pytest.approx(1.0)


def test_fifty_percent_window():
    # level drop of 0.07 at the event cancels the new slope there, so the
    # window mean is b0 + 0.06 / 11; pick b0 to make that 0.02
    b0 = 0.02 - 0.06 / 11
    y = _its_y([b0, 0.0, -0.07, 0.01])
    assert y.mean() == pytest.approx(0.02, abs=1e-15)
    res = short_term_change(_series_around(y), CP)
    assert res.pct_change == pytest.approx(50.0, abs=0.01)
    assert format_pct(res.pct_change) == "+50.00%"


def test_window_must_fit():
    with pytest.raises(InsufficientDataError):
        short_term_change(_series_around(np.full(10, 0.2)), CP)


def test_format_and_stars():
    assert format_pct(-52.77) == "−52.77%"
    assert format_pct(None) == "n/a"
    assert [stars(p) for p in (0.2, 0.04, 0.009, 0.0001, None)] == ["", "*", "**", "***", ""]


def _dyadic_window(seed, n=11):
    # counts over 4096: c*y is exact for c in {0.5, 2, 10}
    return np.random.default_rng(seed).integers(300, 500, size=n) / 4096


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
@pytest.mark.parametrize("seed", range(5))
def test_scaling_invariance_exact(c, seed):
    y = _dyadic_window(seed)
    assert np.array_equal(c * y / c, y)
    a = short_term_change(_series_around(y), CP)
    b = short_term_change(_series_around(c * y), CP)
    assert a.pct_change == b.pct_change
    assert np.array_equal(a.fit.p_values, b.fit.p_values)
    assert_allclose(b.fit.beta, c * a.fit.beta, rtol=1e-12)


@pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
def test_scaling_by_powers_of_two_exact_on_any_input(c):
    y = 0.1 + 0.01 * np.random.default_rng(0).normal(size=11)
    a = short_term_change(_series_around(y), CP)
    b = short_term_change(_series_around(c * y), CP)
    assert a.pct_change == b.pct_change
    assert np.array_equal(a.fit.p_values, b.fit.p_values)


def test_scaling_by_ten_when_inputs_round():
    # 10*y is rounded on multiplication, so agreement is to rounding level
    y = 0.1 + 0.01 * np.random.default_rng(0).normal(size=11)
    a = short_term_change(_series_around(y), CP)
    b = short_term_change(_series_around(10 * y), CP)
    assert b.pct_change == pytest.approx(a.pct_change, rel=1e-12)
    assert_allclose(b.fit.p_values, a.fit.p_values, rtol=1e-12)
    assert format_pct(b.pct_change) == format_pct(a.pct_change)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_long_term_scaling_invariance_exact(c):
    base, post = _dyadic_window(1, 7), _dyadic_window(2, 5)
    a = long_term_change(_long_series(base, post), CP)
    b = long_term_change(_long_series(c * base, c * post), CP)
    assert (a.pct_change, a.t_stat, a.p_value) == (b.pct_change, b.t_stat, b.p_value)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.0005, 0.05))
def test_larger_slope_change_gives_smaller_p(seed, delta):
    rng = np.random.default_rng(seed)
    noise = 0.005 * rng.normal(size=11)
    p = [ols_fit(its_design(), _its_y([0.1, 0, 0, b3]) + noise).p_values[3] for b3 in (delta, 2 * delta)]
    # shift beta3 away from the noise-only estimate in the same direction
    base = ols_fit(its_design(), noise).beta[3]
    if base >= 0:
        assert p[1] < p[0]
    for v in p:
        assert 0.0 <= v <= 1.0


def test_welch_matches_oracle():
    t, dof, p = welch_ttest(BASELINE, POST)
    t_ref, dof_ref, p_ref = welch_oracle(POST, BASELINE)
    assert abs(t - t_ref) < 1e-9 and abs(dof - dof_ref) < 1e-9 and abs(p - p_ref) < 1e-9


def test_pooled_matches_oracle():
    t, dof, p = pooled_ttest(BASELINE, POST)
    t_ref, dof_ref, p_ref = pooled_oracle(POST, BASELINE)
    assert abs(t - t_ref) < 1e-9 and dof == dof_ref and abs(p - p_ref) < 1e-9


def _long_series(base, post):
    # days -7..-1 hold ``base``, days 0..11 hold the baseline mean, 12..16 hold ``post``
    middle = np.full(12, np.mean(base))
    return _series_around(np.r_[base, middle, post])


def test_long_term_example():
    res = long_term_change(_long_series(BASELINE, POST), CP)
    assert res.baseline_mean == pytest.approx(np.mean(BASELINE))
    assert res.post_mean == pytest.approx(0.15)
    assert res.pct_change == pytest.approx(100 * (0.15 - np.mean(BASELINE)) / np.mean(BASELINE))
    assert abs(res.p_value - welch_oracle(POST, BASELINE)[2]) < 1e-9
    pooled = long_term_change(_long_series(BASELINE, POST), CP, test="pooled")
    assert abs(pooled.p_value - pooled_oracle(POST, BASELINE)[2]) < 1e-9


def test_long_term_zero_variance_conventions():
    same = long_term_change(_long_series([0.1] * 7, [0.1] * 5), CP)
    assert same.pct_change == 0.0 and same.p_value == 1.0
    up = long_term_change(_long_series([0.10] * 7, [0.15] * 5), CP)
    assert up.pct_change == pytest.approx(50.0) and up.p_value == 0.0
    assert up.t_stat == float("inf")


def test_long_term_coverage():
    with pytest.raises(InsufficientDataError):
        long_term_change(_series_around(np.full(20, 0.1)), CP)
