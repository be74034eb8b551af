"""Daily affect fraction series."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import date, timedelta
from typing import Iterable

import numpy as np

from .categories import CATEGORIES, INDEX, N_CATEGORIES
from .errors import InsufficientDataError, MoodpulseError


@dataclass
class DailyAffectSeries:
    category: str
    start_date: date
    values: np.ndarray
    counts: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)
        self.missing = np.asarray(self.missing, dtype=bool)
        if not (len(self.values) == len(self.counts) == len(self.missing)):
            raise ValueError("values, counts and missing must have equal length")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(len(self))]

    @property
    def end_date(self) -> date:
        return self.start_date + timedelta(days=len(self) - 1)

    def index_of(self, day: date) -> int:
        return (day - self.start_date).days

    def date_at(self, i: int) -> date:
        return self.start_date + timedelta(days=int(i))


def build_daily_fractions(posts: Iterable[tuple[date, np.ndarray]]) -> dict[str, DailyAffectSeries]:
    """Per-category share of each day's posts carrying the label.

    The denominator is every post of the day, labeled or not. Days between
    the first and last observed day without posts are marked missing and
    hold NaN.
    """
    days, vecs = [], []
    for day, vec in posts:
        days.append(day)
        vecs.append(np.asarray(vec, dtype=bool))
    if not days:
        raise InsufficientDataError("cannot build series from zero posts")
    start = min(days)
    n_days = (max(days) - start).days + 1
    idx = np.array([(d - start).days for d in days])
    counts = np.bincount(idx, minlength=n_days)
    flags = np.zeros((n_days, N_CATEGORIES), dtype=int)
    np.add.at(flags, idx, np.array(vecs, dtype=int).reshape(len(vecs), N_CATEGORIES))
    missing = counts == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = flags / counts[:, None]
    frac[missing] = np.nan
    return {
        cat: DailyAffectSeries(cat, start, frac[:, j].copy(), counts.copy(), missing.copy())
        for j, cat in enumerate(CATEGORIES)
    }


def impute_missing(series: DailyAffectSeries) -> DailyAffectSeries:
    """Fill missing days: linear interpolation inside, nearest value at the ends."""
    observed = ~series.missing
    if observed.sum() < 2:
        raise InsufficientDataError(
            f"{series.category}: need at least 2 observed days to impute, have {int(observed.sum())}"
        )
    if observed.all():
        return replace(series, values=series.values.copy())
    x = np.arange(len(series))
    # np.interp clamps to the end values outside the observed range
    filled = np.interp(x, x[observed], series.values[observed])
    filled[observed] = series.values[observed]
    return replace(series, values=filled, missing=series.missing.copy())


SERIES_HEADER = ["date", "category", "fraction", "count", "missing"]


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_series_csv(path, series: dict[str, DailyAffectSeries]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_HEADER)
        for cat in CATEGORIES:
            if cat not in series:
                continue
            s = series[cat]
            for i, day in enumerate(s.dates):
                writer.writerow([day.isoformat(), cat, _fmt(s.values[i]), int(s.counts[i]), int(s.missing[i])])


def read_series_csv(path) -> dict[str, DailyAffectSeries]:
    """Read the long-format series CSV; also the entry point for users who
    bring their own daily fractions."""
    rows: dict[str, dict[date, tuple[float, int, bool]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing_cols = {"date", "category", "fraction"} - set(reader.fieldnames or [])
        if missing_cols:
            raise MoodpulseError(f"{path}: missing columns {sorted(missing_cols)}")
        for row in reader:
            cat = row["category"].strip()
            if cat not in INDEX:
                raise MoodpulseError(f"{path}:{reader.line_num}: unknown category {cat!r}")
            day = date.fromisoformat(row["date"].strip())
            frac_txt = (row.get("fraction") or "").strip()
            count = int(row.get("count") or 0)
            miss = (row.get("missing") or "").strip() in ("1", "true", "True") or frac_txt == ""
            frac = float("nan") if frac_txt == "" else float(frac_txt)
            if cat in rows and day in rows[cat]:
                raise MoodpulseError(f"{path}:{reader.line_num}: duplicate row for {cat} {day}")
            rows.setdefault(cat, {})[day] = (frac, count, miss)
    out = {}
    for cat in CATEGORIES:
        if cat not in rows:
            continue
        by_day = rows[cat]
        start, end = min(by_day), max(by_day)
        n = (end - start).days + 1
        values = np.full(n, np.nan)
        counts = np.zeros(n, dtype=int)
        missing = np.ones(n, dtype=bool)
        for day, (frac, count, miss) in by_day.items():
            i = (day - start).days
            values[i], counts[i], missing[i] = frac, count, miss
        values[missing] = np.nan
        out[cat] = DailyAffectSeries(cat, start, values, counts, missing)
    return out
