"""Bayesian online change-point detection (Adams & MacKay, 2007).

Gaussian observations with unknown mean and variance under a
Normal-Inverse-Gamma prior, so the one-step predictive for each run length
is a Student-t. Run lengths follow the usual convention: ``r_t = r`` means
the current segment consists of the last ``r`` observations x_{t-r+1..t};
``r_t = 0`` means a new segment starts right after x_t.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np
from scipy.special import gammaln

from ..errors import InsufficientDataError
from ..series import DailyAffectSeries
from .types import BOCPD, ChangePoint, DetectorConfig, NIGPrior, consolidate

TRUNCATE_BELOW = 1e-12
_VAR_FLOOR = 1e-12


def default_prior(values) -> NIGPrior:
    """Empirical-Bayes prior: (series mean, 1, 1, series variance)."""
    x = np.asarray(values, dtype=float)
    var = float(np.var(x))
    return NIGPrior(float(np.mean(x)), 1.0, 1.0, max(var, _VAR_FLOOR * max(1.0, float(np.mean(x)) ** 2)))


def student_t_logpdf(x, mu, kappa, alpha, beta):
    """Log predictive density of x under NIG(mu, kappa, alpha, beta)."""
    nu = 2.0 * alpha
    scale2 = beta * (kappa + 1.0) / (alpha * kappa)
    z2 = (x - mu) ** 2 / (nu * scale2)
    return (
        gammaln(0.5 * (nu + 1.0))
        - gammaln(0.5 * nu)
        - 0.5 * np.log(np.pi * nu * scale2)
        - 0.5 * (nu + 1.0) * np.log1p(z2)
    )


def _steps(x: np.ndarray, hazard: float, prior: NIGPrior, truncate: float) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (run lengths, posterior probabilities) after each observation."""
    log_h, log_1mh = np.log(hazard), np.log1p(-hazard)
    runs = np.array([0])
    logp = np.array([0.0])
    mu = np.array([prior.mu0])
    kappa = np.array([prior.kappa0])
    alpha = np.array([prior.alpha0])
    beta = np.array([prior.beta0])
    for xt in x:
        logpred = student_t_logpdf(xt, mu, kappa, alpha, beta)
        joint = logp + logpred
        grow = joint + log_1mh
        cp = np.logaddexp.reduce(joint) + log_h
        new_logp = np.concatenate(([cp], grow))
        new_logp -= np.logaddexp.reduce(new_logp)
        runs = np.concatenate(([0], runs + 1))
        beta = np.concatenate(([prior.beta0], beta + kappa * (xt - mu) ** 2 / (2.0 * (kappa + 1.0))))
        mu = np.concatenate(([prior.mu0], (kappa * mu + xt) / (kappa + 1.0)))
        kappa = np.concatenate(([prior.kappa0], kappa + 1.0))
        alpha = np.concatenate(([prior.alpha0], alpha + 0.5))
        if truncate > 0:
            keep = new_logp >= np.log(truncate)
            keep[0] = True
            if not keep.all():
                runs, mu, kappa, alpha, beta = runs[keep], mu[keep], kappa[keep], alpha[keep], beta[keep]
                new_logp = new_logp[keep]
                new_logp -= np.logaddexp.reduce(new_logp)
        logp = new_logp
        yield runs, np.exp(logp)


def _validate(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("values contain NaN or infinite entries")
    return x


def run_length_posterior(values, hazard: float = 0.01, prior: NIGPrior | None = None,
                         truncate: float = TRUNCATE_BELOW) -> np.ndarray:
    """Dense matrix R with R[t, r] = P(r_t = r | x_1..t) for t = 1..T.

    Row 0 is the prior (all mass on r = 0). Memory is O(T^2); use only for
    diagnostics and tests.
    """
    x = _validate(values)
    prior = prior or default_prior(x)
    out = np.zeros((len(x) + 1, len(x) + 1))
    out[0, 0] = 1.0
    for t, (runs, probs) in enumerate(_steps(x, hazard, prior, truncate), start=1):
        out[t, runs] = probs
    return out


def changepoint_scores(values, hazard: float = 0.01, prior: NIGPrior | None = None, r_min: int = 2,
                       truncate: float = TRUNCATE_BELOW) -> np.ndarray:
    """P(r_t <= r_min | x_1..t) for every observation t (0-based index)."""
    x = _validate(values)
    prior = prior or default_prior(x)
    return np.array([probs[runs <= r_min].sum() for runs, probs in _steps(x, hazard, prior, truncate)])


def bocpd_detect(series: DailyAffectSeries, config: DetectorConfig) -> list[ChangePoint]:
    x = _validate(series.values)
    if len(x) < 5:
        raise InsufficientDataError(f"BOCPD needs at least 5 observations, got {len(x)}")
    scores = changepoint_scores(x, config.hazard, config.bocpd_prior, config.bocpd_runlength_cut)
    thr = config.confidence_threshold
    burn = config.bocpd_burn_in
    found = []
    for t in range(burn, len(x)):
        c = scores[t]
        if c < thr:
            continue
        # local maximum; the first day of a plateau wins
        if t > burn and scores[t - 1] >= c:
            continue
        if t + 1 < len(x) and scores[t + 1] > c:
            continue
        after = x[t:t + 3].mean()
        before = x[max(t - 3, 0):t].mean()
        direction = "increase" if after > before else "decrease"
        found.append(ChangePoint(series.category, series.date_at(t), BOCPD, float(min(c, 1.0)), direction))
    return consolidate(found, config.merge_window_days)
