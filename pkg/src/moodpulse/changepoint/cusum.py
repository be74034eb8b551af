"""Sliding-window CUSUM mean-shift detection.

Per window, the location is the CUSUM extremum and its permutation
bootstrap confidence follows Taylor's range test. Across the scan, a date
only survives if the overlapping windows agree on it: each window also
yields a posterior over "shift after day k" (a Zellner g-prior Bayes factor,
which depends on the data only through the standardized CUSUM value), and a
date's confidence is the window-averaged posterior mass within
``merge_window_days`` of it. Overlapping windows on pure noise disagree,
so permutation p-values from ~window/stride overlapping tests do not
accumulate into false alarms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import InsufficientDataError
from ..series import DailyAffectSeries
from .types import CUSUM, ChangePoint, DetectorConfig, consolidate, task_seed

# near-ties in floating point are treated as exact ties
_REL_TOL = 1e-10


@dataclass(frozen=True)
class WindowResult:
    k: int
    confidence: float
    direction: str


def _check(values, min_len=4) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) < min_len:
        raise InsufficientDataError(f"need at least {min_len} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("values contain NaN or infinite entries")
    return x


def cusum_statistic(values) -> np.ndarray:
    """S_k = sum_{i<=k} (x_i - mean), k = 1..n (so S_n == 0 up to rounding)."""
    x = np.asarray(values, dtype=float)
    return np.cumsum(x - x.mean())


def _argmax_abs(s: np.ndarray) -> int:
    # S_n is zero by construction, so k ranges over 1..n-1
    a = np.abs(s[:-1])
    top = a.max()
    return int(np.flatnonzero(a >= top - _REL_TOL * top)[0]) + 1


def cusum_window(values, bootstrap_iters: int = 1000, rng_seed=0) -> WindowResult:
    """CUSUM change location and permutation-bootstrap confidence for one window.

    ``k`` is the number of observations before the change (1-based argmax
    of |S_k|, smallest on ties). Confidence is the fraction of random
    permutations whose CUSUM range is strictly below the observed one.
    """
    x = _check(values)
    s = cusum_statistic(x)
    observed = s.max() - s.min()
    if observed <= _REL_TOL * max(np.abs(x).max(), 1e-300):
        # constant window: every S_k is zero, so k = 1 and the means tie
        return WindowResult(1, 0.0, "decrease")
    k = _argmax_abs(s)
    direction = "increase" if x[k:].mean() > x[:k].mean() else "decrease"
    rng = np.random.default_rng(rng_seed)
    perms = rng.permuted(np.broadcast_to(x, (bootstrap_iters, len(x))), axis=1)
    ps = np.cumsum(perms - x.mean(), axis=1)
    ranges = ps.max(axis=1) - ps.min(axis=1)
    conf = float(np.count_nonzero(ranges < observed * (1 - _REL_TOL)) / bootstrap_iters)
    return WindowResult(k, conf, direction)


def shift_posterior(values) -> tuple[float, np.ndarray]:
    """Posterior probability of one mean shift in the window, and its location.

    Model comparison of "one mean" against "mean shifts after observation k"
    with a unit-information g-prior (g = n) on the shift, a flat prior on the
    common mean and Jeffreys' prior on the noise scale; prior odds 1:1 and k
    uniform on 1..n-1. The split R^2 equals n S_k^2 / (k (n-k) SST), so the
    result is invariant under x -> a x + b, a > 0.

    Returns (P(shift), location posterior over k = 1..n-1).
    """
    x = _check(values, min_len=3)
    n = len(x)
    centered = x - x.mean()
    sst = float(centered @ centered)
    k = np.arange(1, n)
    if sst <= (_REL_TOL * max(np.abs(x).max(), 1e-300)) ** 2 * n:
        return 0.0, np.full(n - 1, 1.0 / (n - 1))
    s = np.cumsum(centered)[:-1]
    r2 = np.clip(n * s**2 / (k * (n - k) * sst), 0.0, 1.0)
    g = float(n)
    log_bf = 0.5 * (n - 2) * np.log1p(g) - 0.5 * (n - 1) * np.log1p(g * (1.0 - r2))
    total = logsumexp(log_bf) - np.log(n - 1)
    p_shift = float(0.5 * (1.0 + np.tanh(0.5 * total)))
    return p_shift, np.exp(log_bf - logsumexp(log_bf))


def cusum_detect(series: DailyAffectSeries, config: DetectorConfig) -> list[ChangePoint]:
    """Sliding-window CUSUM over one gap-free (imputed) series."""
    x, cat = series.values, series.category
    w, stride, mw = config.window_days, config.stride_days, config.merge_window_days
    thr = config.confidence_threshold
    n = len(x)
    if n < w:
        raise InsufficientDataError(f"series of length {n} is shorter than the {w}-day window")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains missing or non-finite values; impute first")

    base_seed = task_seed(config.rng_seed, cat)
    # per window: (start, candidate index, gate confidence, P(shift), location posterior)
    windows = []
    mass = np.zeros(n)
    cover = np.zeros(n)
    for s in range(0, n - w + 1, stride):
        seg = x[s:s + w]
        res = cusum_window(seg, config.bootstrap_iters, [base_seed, s])
        p_shift, loc = shift_posterior(seg)
        windows.append((s, s + res.k, min(res.confidence, p_shift), p_shift, loc))
        # split k puts the first post-shift day at s + k
        mass[s + 1:s + w] += p_shift * loc
        cover[s + 1:s + w] += 1
    density = np.divide(mass, cover, out=np.zeros(n), where=cover > 0)

    candidates = set()
    for s, d0, gate, _, _ in windows:
        if gate < thr:
            continue
        lo, hi = max(d0 - mw, 1), min(d0 + mw, n - 1)
        candidates.add(lo + int(np.argmax(density[lo:hi + 1])))

    found = []
    half = w // 2
    for d in sorted(candidates):
        votes = [
            p_shift * loc[np.abs(np.arange(s + 1, s + w) - d) <= mw].sum()
            for s, _, _, p_shift, loc in windows
            if s < d < s + w
        ]
        support = min(float(np.mean(votes)), 1.0)
        if support < thr:
            continue
        after = x[d:d + half].mean()
        before = x[max(d - half, 0):d].mean()
        direction = "increase" if after > before else "decrease"
        found.append(ChangePoint(cat, series.date_at(d), CUSUM, support, direction))
    return consolidate(found, mw)
