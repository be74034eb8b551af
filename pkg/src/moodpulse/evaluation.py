"""Event-level evaluation: grouping detections into events, precision,
duplicated-event rate (DERate) and confidence summaries."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np

from .categories import N_CATEGORIES
from .changepoint import ChangePoint
from .errors import MoodpulseError


@dataclass
class EventCluster:
    event_id: str
    changepoints: list[ChangePoint]
    verified: bool | None = None

    @property
    def start(self) -> date:
        return min(p.date for p in self.changepoints)

    @property
    def end(self) -> date:
        return max(p.date for p in self.changepoints)

    @property
    def categories(self) -> set[str]:
        return {p.category for p in self.changepoints}


@dataclass
class EventVerdict:
    event_id: str
    start_date: date
    end_date: date
    verified: bool
    description: str = ""
    matched_changepoints: list[tuple[str, date]] = field(default_factory=list)

    def __post_init__(self):
        if self.end_date < self.start_date:
            raise MoodpulseError(f"verdict {self.event_id}: end_date precedes start_date")


@dataclass
class EvalReport:
    precision: float | None
    derate: float | None
    n_changepoints: int
    n_events: int
    confidence_mean: float | None
    confidence_std: float | None

    def to_json(self) -> dict:
        def r2(v):
            return None if v is None else round(float(v), 2)

        return {
            "precision": r2(self.precision),
            "derate": r2(self.derate),
            "n_changepoints": self.n_changepoints,
            "n_events": self.n_events,
            "confidence_mean": r2(self.confidence_mean),
            "confidence_std": r2(self.confidence_std),
        }


def group_events(changepoints: Sequence[ChangePoint], grouping_window_days: int = 2) -> list[EventCluster]:
    """Single-linkage grouping across categories: consecutive detections
    whose dates differ by at most ``grouping_window_days`` share an event."""
    pts = sorted(changepoints, key=lambda p: (p.date, p.category, p.method))
    groups: list[list[ChangePoint]] = []
    for p in pts:
        if groups and (p.date - groups[-1][-1].date).days <= grouping_window_days:
            groups[-1].append(p)
        else:
            groups.append([p])
    return [EventCluster(f"E{i + 1:03d}", g) for i, g in enumerate(groups)]


def read_verdicts(path) -> list[EventVerdict]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"event_id", "start_date", "end_date", "verified"}
        missing = need - set(reader.fieldnames or [])
        if missing:
            raise MoodpulseError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            flag = row["verified"].strip()
            if flag not in ("0", "1"):
                raise MoodpulseError(f"{path}:{reader.line_num}: verified must be 0 or 1")
            out.append(EventVerdict(
                row["event_id"].strip(),
                date.fromisoformat(row["start_date"].strip()),
                date.fromisoformat(row["end_date"].strip()),
                flag == "1",
                (row.get("description") or "").strip(),
            ))
    return out


def apply_verdicts(clusters: Sequence[EventCluster], verdicts: Sequence[EventVerdict]) -> list[EventCluster]:
    """Attach a verdict to every cluster: by event id first, otherwise the
    first verdict whose date range overlaps the cluster. Unmatched clusters
    are an error."""
    by_id = {v.event_id: v for v in verdicts}
    unmatched = []
    for c in clusters:
        v = by_id.get(c.event_id)
        if v is None:
            v = next((v for v in verdicts if v.start_date <= c.end and c.start <= v.end_date), None)
        if v is None:
            unmatched.append(f"{c.event_id} ({c.start}..{c.end})")
            continue
        c.verified = v.verified
        v.matched_changepoints.extend((p.category, p.date) for p in c.changepoints)
    if unmatched:
        raise MoodpulseError(f"no verdict for event clusters: {', '.join(unmatched)}")
    return list(clusters)


def precision(clusters: Sequence[EventCluster], verdicts: Sequence[EventVerdict] | None = None) -> float | None:
    """Fraction of event clusters verified as real events; None without clusters."""
    if verdicts is not None:
        apply_verdicts(clusters, verdicts)
    if not clusters:
        return None
    if any(c.verified is None for c in clusters):
        raise MoodpulseError("every cluster needs a verdict before computing precision")
    return sum(bool(c.verified) for c in clusters) / len(clusters)


def derate(clusters: Sequence[EventCluster]) -> float | None:
    """Mean over verified events of (distinct categories detecting it) / 21."""
    verified = [c for c in clusters if c.verified]
    if not verified:
        return None
    return float(np.mean([len(c.categories) / N_CATEGORIES for c in verified]))


def confidence_summary(changepoints: Sequence[ChangePoint]) -> tuple[float, float] | None:
    """Sample mean and standard deviation (0 for a single point)."""
    conf = np.array([p.confidence for p in changepoints], dtype=float)
    if conf.size == 0:
        return None
    std = float(np.std(conf, ddof=1)) if conf.size > 1 else 0.0
    return float(conf.mean()), std


def evaluate(changepoints: Sequence[ChangePoint], verdicts: Sequence[EventVerdict] | None = None,
             grouping_window_days: int = 2) -> tuple[EvalReport, list[EventCluster]]:
    clusters = group_events(changepoints, grouping_window_days)
    prec = der = None
    if verdicts is not None:
        apply_verdicts(clusters, verdicts)
        prec = precision(clusters)
        der = derate(clusters)
    summary = confidence_summary(changepoints)
    mean, std = summary if summary else (None, None)
    report = EvalReport(prec, der, len(changepoints), len(clusters), mean, std)
    return report, clusters
