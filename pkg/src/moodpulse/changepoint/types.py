from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass
from datetime import date

from ..errors import ConfigError

CUSUM = "CUSUM"
BOCPD = "BOCPD"


@dataclass(frozen=True)
class NIGPrior:
    """Normal-Inverse-Gamma hyperparameters (mu0, kappa0, alpha0, beta0)."""

    mu0: float
    kappa0: float
    alpha0: float
    beta0: float

    def __post_init__(self):
        if not (self.kappa0 > 0 and self.alpha0 > 0 and self.beta0 > 0):
            raise ConfigError("NIG prior needs kappa0, alpha0, beta0 > 0")


@dataclass(frozen=True)
class DetectorConfig:
    window_days: int = 28
    stride_days: int = 3
    confidence_threshold: float = 0.5
    bootstrap_iters: int = 1000
    rng_seed: int = 0
    hazard: float = 0.01
    # None: empirical-Bayes prior from the series (mean, 1, 1, variance)
    bocpd_prior: NIGPrior | None = None
    bocpd_runlength_cut: int = 2
    bocpd_burn_in: int = 5
    merge_window_days: int = 2

    def __post_init__(self):
        if self.window_days < 2 * self.stride_days or self.stride_days < 1:
            raise ConfigError("need stride_days >= 1 and window_days >= 2 * stride_days")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError("confidence_threshold must lie in [0, 1]")
        if self.bootstrap_iters < 1:
            raise ConfigError("bootstrap_iters must be positive")
        if not 0.0 < self.hazard < 1.0:
            raise ConfigError("hazard must lie in (0, 1)")
        if self.bocpd_runlength_cut < 0 or self.merge_window_days < 0:
            raise ConfigError("bocpd_runlength_cut and merge_window_days must be non-negative")
        if isinstance(self.bocpd_prior, dict):
            object.__setattr__(self, "bocpd_prior", NIGPrior(**self.bocpd_prior))


@dataclass(frozen=True)
class ChangePoint:
    category: str
    date: date
    method: str
    confidence: float
    direction: str

    def to_json(self) -> dict:
        d = asdict(self)
        d["date"] = self.date.isoformat()
        d["confidence"] = round(float(self.confidence), 6)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ChangePoint":
        return cls(d["category"], date.fromisoformat(d["date"]), d["method"], float(d["confidence"]), d["direction"])


def task_seed(seed: int, category: str) -> int:
    """Per-category seed: the run seed xor a stable hash of the category."""
    return (int(seed) ^ zlib.crc32(category.encode("utf-8"))) & 0xFFFFFFFFFFFFFFFF


def consolidate(points: list[ChangePoint], window_days: int) -> list[ChangePoint]:
    """Keep the most confident detection among those within ``window_days``.

    Greedy: repeatedly keep the strongest remaining point (CUSUM before
    BOCPD, then earlier date on ties) and drop everything of the same
    category within the window. Returns points sorted by (date, category).
    """
    order = sorted(points, key=lambda p: (-p.confidence, p.method != CUSUM, p.date, p.category))
    kept: list[ChangePoint] = []
    for p in order:
        if any(q.category == p.category and abs((q.date - p.date).days) <= window_days for q in kept):
            continue
        kept.append(p)
    return sorted(kept, key=lambda p: (p.date, p.category, p.method))
