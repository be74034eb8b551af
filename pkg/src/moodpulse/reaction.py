"""Short- and long-term size of an affect reaction around a change point.

Short term: interrupted time-series regression
``y = b0 + b1*t + b2*after + b3*t*after`` over the 11 days from 7 days before
to 3 days after the change (the change day counts as "after"), reported as
100 * b3 / mean(y). Long term: the 7 days before the change against the
5-day average centred on day +14.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np
from scipy import stats

from .errors import InsufficientDataError, RankDeficientError
from .series import DailyAffectSeries

ITS_COLUMNS = ("intercept", "t", "after", "t_after")
PRE_DAYS, POST_DAYS = 7, 3
BASELINE_DAYS = (-7, -1)
LONG_TERM_DAYS = (12, 16)


@dataclass
class ITSFit:
    beta: np.ndarray
    std_err: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    n: int
    dof: int
    segment_mean: float
    rss: float


@dataclass
class ShortTermChange:
    category: str
    event_date: date
    pct_change: float | None
    p_value: float
    fit: ITSFit
    imputed_in_window: bool = False


@dataclass
class LongTermChange:
    category: str
    event_date: date
    baseline_mean: float
    post_mean: float
    pct_change: float | None
    t_stat: float
    dof: float
    p_value: float
    test: str = "welch"
    imputed_in_window: bool = False
    baseline: np.ndarray = field(default=None, repr=False)
    post: np.ndarray = field(default=None, repr=False)


def _collinear_columns(X: np.ndarray, names) -> list[str]:
    bad = []
    scale = np.linalg.norm(X, axis=0)
    for j in range(X.shape[1]):
        if scale[j] == 0:
            bad.append(names[j])
            continue
        prev = X[:, :j]
        if prev.shape[1] == 0:
            continue
        coef, *_ = np.linalg.lstsq(prev, X[:, j], rcond=None)
        if np.linalg.norm(X[:, j] - prev @ coef) <= 1e-10 * scale[j]:
            bad.append(names[j])
    return bad


def _two_sided_p(t: np.ndarray, dof: float) -> np.ndarray:
    return np.clip(2.0 * stats.t.sf(np.abs(t), dof), 0.0, 1.0)


def ols_fit(design, y, column_names=ITS_COLUMNS) -> ITSFit:
    """Least squares with classical (homoskedastic) standard errors.

    A coefficient with zero standard error (perfect fit) gets p = 1 if it
    is exactly zero and p = 0 otherwise.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if len(y) != n:
        raise ValueError("design and y disagree on the number of observations")
    if n <= p:
        raise InsufficientDataError(f"need more observations ({n}) than columns ({p})")
    names = list(column_names) if len(column_names) == p else [f"x{j}" for j in range(p)]
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientError(_collinear_columns(X, names))
    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = n - p
    r_inv = np.linalg.inv(r)
    y_norm = max(float(np.linalg.norm(y)), 1e-300)
    if rss <= (1e-12 * y_norm) ** 2:
        # perfect fit: residual is rounding noise, so are the standard errors
        rss = 0.0
        se = np.zeros(p)
        contrib = np.abs(beta) * np.linalg.norm(X, axis=0)
        t = np.where(contrib <= 1e-9 * y_norm, 0.0, np.copysign(np.inf, beta))
    else:
        cov = rss / dof * (r_inv @ r_inv.T)
        se = np.sqrt(np.diag(cov))
        t = beta / se
    pv = _two_sided_p(t, dof)
    return ITSFit(beta, se, t, pv, n, dof, float(y.mean()), rss)


def its_design(n_pre: int = PRE_DAYS, n_post: int = POST_DAYS) -> np.ndarray:
    """Columns (1, t, after, t*after) for t = 0..n_pre+n_post."""
    t = np.arange(n_pre + n_post + 1, dtype=float)
    after = (t >= n_pre).astype(float)
    return np.column_stack([np.ones_like(t), t, after, t * after])


def _window(series: DailyAffectSeries, cp_date: date, first: int, last: int):
    i0 = series.index_of(cp_date + timedelta(days=first))
    i1 = series.index_of(cp_date + timedelta(days=last))
    if i0 < 0 or i1 >= len(series):
        raise InsufficientDataError(
            f"{series.category}: series {series.start_date}..{series.end_date} does not cover "
            f"{cp_date + timedelta(days=first)}..{cp_date + timedelta(days=last)}"
        )
    vals = series.values[i0:i1 + 1]
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{series.category}: window around {cp_date} holds missing values; impute first")
    return vals, bool(series.missing[i0:i1 + 1].any())


def _unit_scale(*samples) -> tuple[list[np.ndarray], float]:
    """Divide by the largest magnitude. Division is correctly rounded, so
    whenever c*y is exact the scaled inputs, and every statistic computed
    from them, are bit-identical for y and c*y."""
    scale = max(float(np.max(np.abs(s))) for s in samples)
    if scale == 0.0:
        return list(samples), 1.0
    return [s / scale for s in samples], scale


def short_term_change(series: DailyAffectSeries, cp_date: date) -> ShortTermChange:
    y, imputed = _window(series, cp_date, -PRE_DAYS, POST_DAYS)
    (z,), scale = _unit_scale(y)
    unit = ols_fit(its_design(), z)
    pct = None if unit.segment_mean == 0 else 100.0 * unit.beta[3] / unit.segment_mean
    fit = ITSFit(unit.beta * scale, unit.std_err * scale, unit.t_values, unit.p_values,
                 unit.n, unit.dof, float(y.mean()), unit.rss * scale**2)
    return ShortTermChange(series.category, cp_date, pct, float(fit.p_values[3]), fit, imputed)


def _moments(x: np.ndarray) -> tuple[float, float]:
    """Mean and sample variance; a constant sample gets exactly (x0, 0)
    instead of rounding noise from the summation."""
    if np.ptp(x) == 0:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.var(ddof=1))


def welch_ttest(a, b) -> tuple[float, float, float]:
    """(t, dof, two-sided p) for mean(b) - mean(a), unequal variances."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    (ma, va), (mb, vb) = _moments(a), _moments(b)
    va, vb = va / len(a), vb / len(b)
    diff = mb - ma
    se2 = va + vb
    if se2 == 0:
        return _degenerate(diff, len(a) + len(b) - 2)
    dof = se2**2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    t = diff / math.sqrt(se2)
    return float(t), float(dof), float(_two_sided_p(np.array(t), dof))


def pooled_ttest(a, b) -> tuple[float, float, float]:
    """(t, dof, two-sided p) for mean(b) - mean(a), pooled variance."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    (ma, va), (mb, vb) = _moments(a), _moments(b)
    dof = na + nb - 2
    sp2 = ((na - 1) * va + (nb - 1) * vb) / dof
    diff = mb - ma
    if sp2 == 0:
        return _degenerate(diff, dof)
    t = diff / math.sqrt(sp2 * (1 / na + 1 / nb))
    return float(t), float(dof), float(_two_sided_p(np.array(t), dof))


def _degenerate(diff: float, dof: float) -> tuple[float, float, float]:
    # zero variance on both sides: equal means p = 1, unequal p = 0
    if diff == 0:
        return 0.0, float(dof), 1.0
    return math.copysign(math.inf, diff), float(dof), 0.0


def long_term_change(series: DailyAffectSeries, cp_date: date, test: str = "welch") -> LongTermChange:
    base, imp_a = _window(series, cp_date, *BASELINE_DAYS)
    post, imp_b = _window(series, cp_date, *LONG_TERM_DAYS)
    (zb, zp), scale = _unit_scale(base, post)
    if test == "welch":
        t, dof, p = welch_ttest(zb, zp)
    elif test == "pooled":
        t, dof, p = pooled_ttest(zb, zp)
    else:
        raise ValueError(f"unknown t-test {test!r}; use 'welch' or 'pooled'")
    ub, up = _moments(zb)[0], _moments(zp)[0]
    pct = None if ub == 0 else 100.0 * (up - ub) / ub
    bm, pm = _moments(base)[0], _moments(post)[0]
    return LongTermChange(series.category, cp_date, bm, pm, pct, t, dof, p, test, imp_a or imp_b, base, post)


def stars(p: float | None) -> str:
    if p is None or not math.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def format_pct(pct: float | None) -> str:
    """Percent change as reported, e.g. '+50.00%' or '−52.77%'."""
    if pct is None or not math.isfinite(pct):
        return "n/a"
    sign = "+" if pct >= 0 else "−"
    return f"{sign}{abs(pct):.2f}%"
