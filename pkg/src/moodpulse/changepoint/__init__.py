"""Change-point detection on daily affect series: CUSUM, BOCPD and their merge."""

from __future__ import annotations

from .bocpd import bocpd_detect, changepoint_scores, default_prior, run_length_posterior
from .cusum import cusum_detect, cusum_statistic, cusum_window, shift_posterior
from .types import BOCPD, CUSUM, ChangePoint, DetectorConfig, NIGPrior, consolidate, task_seed

__all__ = [
    "BOCPD",
    "CUSUM",
    "ChangePoint",
    "DetectorConfig",
    "NIGPrior",
    "bocpd_detect",
    "changepoint_scores",
    "cusum_detect",
    "cusum_statistic",
    "cusum_window",
    "default_prior",
    "detect_series",
    "merge_changepoints",
    "run_length_posterior",
    "shift_posterior",
    "task_seed",
]


def merge_changepoints(cusum: list[ChangePoint], bocpd: list[ChangePoint], config: DetectorConfig) -> list[ChangePoint]:
    """Union of both detectors above threshold, one detection per merge window."""
    pool = [p for p in (*cusum, *bocpd) if p.confidence >= config.confidence_threshold]
    return consolidate(pool, config.merge_window_days)


def detect_series(series, config: DetectorConfig) -> list[ChangePoint]:
    """Run both detectors on one imputed series and merge.

    CUSUM is skipped for series shorter than one window and BOCPD for
    series shorter than 5 days.
    """
    c = cusum_detect(series, config) if len(series) >= config.window_days else []
    b = bocpd_detect(series, config) if len(series) >= 5 else []
    return merge_changepoints(c, b, config)
