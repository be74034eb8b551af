"""Assigning affect labels: precomputed label files, lexicon matching and DDR.

Also scores any labeler against gold annotations with per-category F1.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .categories import CATEGORIES, INDEX, N_CATEGORIES, empty_vector
from .errors import ConfigError, LabelConflictError, MoodpulseError

log = logging.getLogger(__name__)


@dataclass
class Lexicon:
    entries: dict[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        for cat, words in self.entries.items():
            if cat not in INDEX:
                raise KeyError(f"unknown affect category: {cat!r}")
            self.entries[cat] = frozenset(w.lower() for w in words)

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        """Read an NRC-style lexicon: ``word<TAB>category`` with an optional
        third 0/1 association column. Rows for categories outside the 21
        affect categories (e.g. NRC's positive/negative) are ignored."""
        entries: dict[str, set[str]] = {}
        ignored = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t")
                if not line.strip() or line.startswith("#"):
                    continue
                if len(parts) < 2:
                    raise ConfigError(f"{path}:{lineno}: expected 'word<TAB>category'")
                word, cat = parts[0].strip().lower(), parts[1].strip().lower()
                if len(parts) > 2 and parts[2].strip() == "0":
                    continue
                if cat not in INDEX:
                    ignored += 1
                    continue
                entries.setdefault(cat, set()).add(word)
        if ignored:
            log.info("lexicon %s: ignored %d rows with non-affect categories", path, ignored)
        return cls({c: frozenset(ws) for c, ws in entries.items()})

    def categories(self) -> list[str]:
        return [c for c in CATEGORIES if c in self.entries]


def label_with_lexicon(tokens: Iterable[str], lexicon: Lexicon) -> np.ndarray:
    vec = empty_vector()
    toks = set(tokens)
    for cat, words in lexicon.entries.items():
        if toks & words:
            vec[INDEX[cat]] = True
    return vec


class WordVectorTable:
    """Token -> embedding lookup with a fixed dimension."""

    def __init__(self, vectors: Mapping[str, Iterable[float]], dim: int | None = None):
        arrays = {tok: np.asarray(v, dtype=float) for tok, v in vectors.items()}
        if dim is None:
            if not arrays:
                raise ValueError("cannot infer dimension of an empty table")
            dim = len(next(iter(arrays.values())))
        if dim <= 0:
            raise ValueError("dim must be positive")
        for tok, v in arrays.items():
            if v.shape != (dim,):
                raise ValueError(f"vector for {tok!r} has length {v.size}, expected {dim}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"vector for {tok!r} has non-finite components")
        self.dim = dim
        self.vectors = arrays

    def __contains__(self, token) -> bool:
        return token in self.vectors

    def __getitem__(self, token) -> np.ndarray:
        return self.vectors[token]

    def mean_vector(self, tokens: Iterable[str]) -> tuple[np.ndarray | None, int]:
        covered = [self.vectors[t] for t in tokens if t in self.vectors]
        if not covered:
            return None, 0
        return np.mean(covered, axis=0), len(covered)

    @classmethod
    def from_file(cls, path) -> "WordVectorTable":
        """Text format: ``token v1 ... vd`` per line; a word2vec-style
        ``count dim`` header line is tolerated."""
        vectors = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip().split(" ")
                if not line.strip():
                    continue
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    dim = int(parts[1])
                    continue
                try:
                    vectors[parts[0]] = [float(x) for x in parts[1:]]
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: non-numeric vector component") from None
        try:
            return cls(vectors, dim)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class DDRConfig:
    threshold: float = 0.3
    min_covered_tokens: int = 1

    def __post_init__(self):
        if not -1.0 <= self.threshold <= 1.0:
            raise ConfigError("DDR threshold must lie in [-1, 1]")
        if self.min_covered_tokens < 0:
            raise ConfigError("min_covered_tokens must be non-negative")


def _cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return None
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def ddr_score(tokens, dictionary_words, table: WordVectorTable, min_covered_tokens: int = 1) -> float | None:
    """Cosine between the document's mean word vector and the dictionary centroid.

    Returns None for an uncovered document: fewer than ``min_covered_tokens``
    (and at least one) tokens in the table, no covered dictionary word, or a
    zero-norm mean vector.
    """
    doc, n_doc = table.mean_vector(tokens)
    if doc is None or n_doc < max(min_covered_tokens, 1):
        return None
    centroid, _ = table.mean_vector(dictionary_words)
    if centroid is None:
        return None
    return _cosine(doc, centroid)


class DDRLabeler:
    def __init__(self, lexicon: Lexicon, table: WordVectorTable, config: DDRConfig = DDRConfig()):
        self.table = table
        self.config = config
        self.centroids = {}
        for cat in lexicon.categories():
            centroid, n = table.mean_vector(sorted(lexicon.entries[cat]))
            if centroid is None or not np.any(centroid):
                log.warning("DDR dictionary for %r has no covered words; category stays off", cat)
                continue
            self.centroids[cat] = centroid

    def score(self, tokens) -> dict[str, float] | None:
        doc, n = self.table.mean_vector(tokens)
        if doc is None or n < max(self.config.min_covered_tokens, 1):
            return None
        scores = {}
        for cat, centroid in self.centroids.items():
            s = _cosine(doc, centroid)
            if s is None:
                return None
            scores[cat] = s
        return scores

    def __call__(self, tokens) -> np.ndarray:
        vec = empty_vector()
        scores = self.score(tokens)
        if scores is None:
            return vec
        for cat, s in scores.items():
            vec[INDEX[cat]] = s >= self.config.threshold
        return vec


@dataclass
class LoadedLabels:
    labels: dict[str, np.ndarray]
    unknown_ids: int = 0
    unlabeled: int = 0


def _parse_flag(value: str, where: str) -> bool:
    v = (value or "0").strip()
    if v in ("0", ""):
        return False
    if v == "1":
        return True
    raise MoodpulseError(f"{where}: label values must be 0 or 1, got {value!r}")


def load_labels(path, corpus_ids: Iterable[str] | None = None) -> LoadedLabels:
    """Read a label CSV (``id`` plus category columns holding 0/1).

    Missing category columns are treated as all-zero. Duplicate rows for an
    id are accepted when identical and rejected when they conflict. When
    ``corpus_ids`` is given, rows for unknown ids are dropped and counted,
    and corpus posts without a row receive the all-off vector.
    """
    labels: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if header and "id" not in header:
            raise MoodpulseError(f"{path}: label file needs an 'id' column")
        unknown_cols = [c for c in header if c != "id" and c not in INDEX]
        if unknown_cols:
            raise MoodpulseError(f"{path}: unknown category columns {unknown_cols}")
        cols = [c for c in header if c in INDEX]
        for row in reader:
            where = f"{path}:{reader.line_num}"
            post_id = (row.get("id") or "").strip()
            if not post_id:
                raise MoodpulseError(f"{where}: empty id")
            vec = empty_vector()
            for c in cols:
                vec[INDEX[c]] = _parse_flag(row.get(c), where)
            prev = labels.get(post_id)
            if prev is not None and not np.array_equal(prev, vec):
                raise LabelConflictError(f"{where}: conflicting label rows for id {post_id!r}")
            labels[post_id] = vec
    result = LoadedLabels(labels)
    if corpus_ids is not None:
        ids = list(corpus_ids)
        known = set(ids)
        result.unknown_ids = sum(1 for i in labels if i not in known)
        full = {}
        for i in ids:
            if i in labels:
                full[i] = labels[i]
            else:
                full[i] = empty_vector()
                result.unlabeled += 1
        result.labels = full
    return result


def write_labels(path, ids: Iterable[str], vectors: Iterable[np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *CATEGORIES])
        for post_id, vec in zip(ids, vectors):
            writer.writerow([post_id, *(int(b) for b in vec)])


def f1_scores(predicted: Mapping[str, np.ndarray], gold: Mapping[str, np.ndarray]) -> dict[str, dict]:
    """Per-category precision, recall, F1 and gold support over shared ids.

    Precision/recall with an empty denominator and F1 with
    precision + recall = 0 are reported as 0.
    """
    ids = sorted(set(predicted) & set(gold))
    if not ids:
        raise MoodpulseError("predicted and gold labels share no ids")
    p = np.array([np.asarray(predicted[i], dtype=bool) for i in ids]).reshape(len(ids), N_CATEGORIES)
    g = np.array([np.asarray(gold[i], dtype=bool) for i in ids]).reshape(len(ids), N_CATEGORIES)
    tp = (p & g).sum(axis=0)
    fp = (p & ~g).sum(axis=0)
    fn = (~p & g).sum(axis=0)
    out = {}
    for j, cat in enumerate(CATEGORIES):
        prec = tp[j] / (tp[j] + fp[j]) if tp[j] + fp[j] else 0.0
        rec = tp[j] / (tp[j] + fn[j]) if tp[j] + fn[j] else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[cat] = {
            "precision": float(prec),
            "recall": float(rec),
            "f1": float(f1),
            "support": int(tp[j] + fn[j]),
        }
    return out


def macro_f1(scores: Mapping[str, dict], categories: Iterable[str] | None = None) -> tuple[float, float]:
    """Mean and sample std of F1 over categories with non-zero support."""
    cats = categories if categories is not None else scores.keys()
    vals = [scores[c]["f1"] for c in cats if scores[c]["support"] > 0]
    if not vals:
        return math.nan, math.nan
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return float(np.mean(vals)), std
