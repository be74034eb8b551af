"""Topics around a change point and the metrics used to judge them.

Documents are embedded as L2-normalised TF-IDF rows (or caller-supplied
vectors), grouped by spherical k-means with farthest-point seeding, and
each cluster is described by its class-based TF-IDF keywords.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS, TfidfVectorizer

from .errors import ConfigError

DEFAULT_STOPWORDS = frozenset(ENGLISH_STOP_WORDS) | frozenset({"rt", "amp", "im", "i'm", "it's", "don't"})
NPMI_EPS = 1e-12


@dataclass(frozen=True)
class TopicConfig:
    n_topics: int = 10
    top_k_keywords: int = 10
    window_days: int = 3
    jaccard_new_threshold: float = 0.2
    min_docs: int = 20
    rng_seed: int = 0
    max_iter: int = 100

    def __post_init__(self):
        if min(self.n_topics, self.top_k_keywords, self.window_days, self.min_docs, self.max_iter) < 1:
            raise ConfigError("topic counts, window and min_docs must be positive")
        if not 0.0 <= self.jaccard_new_threshold <= 1.0:
            raise ConfigError("jaccard_new_threshold must lie in [0, 1]")


@dataclass
class Topic:
    id: int
    keywords: list[str]
    size: int
    score_per_keyword: list[float]
    members: list[int] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "keywords": list(self.keywords),
            "size": self.size,
            "scores": [round(float(s), 6) for s in self.score_per_keyword],
        }


@dataclass
class EmergingTopicReport:
    topics_before: list[Topic]
    topics_after: list[Topic]
    emerging: list[int]
    jaccard: np.ndarray
    status: str = "ok"
    reason: str = ""

    @property
    def emerging_topics(self) -> list[Topic]:
        return [self.topics_after[i] for i in self.emerging]


def _identity(doc):
    return doc


def embed_tfidf(docs: Sequence[Sequence[str]]) -> np.ndarray:
    vec = TfidfVectorizer(analyzer=_identity, norm="l2", lowercase=False)
    return vec.fit_transform([list(d) for d in docs]).toarray()


def _l2_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def farthest_point_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    """First seed drawn at random, then repeatedly the row least similar to
    every chosen seed (lowest index on ties). Stops early once every row
    coincides with a seed."""
    seeds = [int(rng.integers(len(x)))]
    closest = x @ x[seeds[0]]
    while len(seeds) < k:
        dist = 1.0 - closest
        j = int(np.argmax(dist))
        if dist[j] <= 1e-12:
            break
        seeds.append(j)
        closest = np.maximum(closest, x @ x[j])
    return seeds


def spherical_kmeans(x: np.ndarray, k: int, seed: int, max_iter: int = 100) -> np.ndarray:
    """Cluster unit rows by cosine similarity; returns labels 0..k'-1, k' <= k."""
    rng = np.random.default_rng(seed)
    centers = x[farthest_point_seeds(x, k, rng)].copy()
    labels = np.full(len(x), -1)
    for _ in range(max_iter):
        new = np.argmax(x @ centers.T, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(len(centers)):
            members = labels == c
            if members.any():
                centers[c] = _l2_rows(x[members].sum(axis=0, keepdims=True))[0]
    # drop centers that ended up empty
    _, dense = np.unique(labels, return_inverse=True)
    return dense


def class_tfidf(docs: Sequence[Sequence[str]], labels: np.ndarray) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Per-cluster term weights: within-cluster relative frequency times
    log(k / number of clusters containing the term).

    Returns (vocabulary, weights[k, V], raw counts[k, V]).
    """
    vocab = sorted({t for d in docs for t in d})
    index = {t: i for i, t in enumerate(vocab)}
    k = int(labels.max()) + 1
    counts = np.zeros((k, len(vocab)))
    for doc, lab in zip(docs, labels):
        for tok in doc:
            counts[lab, index[tok]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    tf = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    df = (counts > 0).sum(axis=0)
    idf = np.log(k / np.maximum(df, 1))
    return vocab, tf * idf, counts


def extract_topics(docs: Sequence[Sequence[str]], config: TopicConfig = TopicConfig(),
                   doc_vectors: np.ndarray | None = None, stopwords=DEFAULT_STOPWORDS) -> list[Topic]:
    """Cluster documents and describe each cluster by its top keywords.

    Returns an empty list when fewer than ``min_docs`` non-empty documents
    are available. Topics are ordered by size (largest first).
    """
    docs = [list(d) for d in docs]
    keep = [i for i, d in enumerate(docs) if d]
    if doc_vectors is not None:
        doc_vectors = np.asarray(doc_vectors, dtype=float)
        if len(doc_vectors) != len(docs):
            raise ValueError("doc_vectors must have one row per document")
        keep = [i for i in keep if np.any(doc_vectors[i])]
    if len(keep) < config.min_docs:
        return []
    kept_docs = [docs[i] for i in keep]
    x = _l2_rows(doc_vectors[keep]) if doc_vectors is not None else embed_tfidf(kept_docs)
    k = max(1, min(config.n_topics, len(kept_docs) // 5))
    labels = spherical_kmeans(x, k, config.rng_seed, config.max_iter)
    vocab, weights, counts = class_tfidf(kept_docs, labels)

    clusters = []
    for c in range(weights.shape[0]):
        members = [keep[i] for i in np.flatnonzero(labels == c)]
        present = np.flatnonzero(counts[c] > 0)
        ranked = sorted(present, key=lambda j: (-weights[c, j], -counts[c, j], vocab[j]))
        chosen = [j for j in ranked if vocab[j] not in stopwords and vocab[j].strip()][: config.top_k_keywords]
        clusters.append((members, [vocab[j] for j in chosen], [float(weights[c, j]) for j in chosen]))
    clusters.sort(key=lambda m: (-len(m[0]), m[0][0]))
    return [Topic(i, kw, len(mem), sc, mem) for i, (mem, kw, sc) in enumerate(clusters)]


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def jaccard_matrix(after: Sequence[Topic], before: Sequence[Topic]) -> np.ndarray:
    return np.array([[jaccard(t.keywords, u.keywords) for u in before] for t in after]).reshape(len(after), len(before))


def compare_topics(before: list[Topic], after: list[Topic], threshold: float) -> EmergingTopicReport:
    """An after-topic is emerging iff its keyword Jaccard with every before-topic is below ``threshold``."""
    jac = jaccard_matrix(after, before)
    emerging = [i for i in range(len(after)) if jac.shape[1] == 0 or jac[i].max() < threshold]
    return EmergingTopicReport(before, after, emerging, jac)


def emerging_topics(before_docs, after_docs, config: TopicConfig = TopicConfig(),
                    before_vectors=None, after_vectors=None, stopwords=DEFAULT_STOPWORDS) -> EmergingTopicReport:
    before = extract_topics(before_docs, config, before_vectors, stopwords)
    after = extract_topics(after_docs, config, after_vectors, stopwords)
    short = [name for name, docs in (("before", before_docs), ("after", after_docs))
             if sum(1 for d in docs if d) < config.min_docs]
    if short or not before or not after:
        reason = f"fewer than {config.min_docs} documents in the {' and '.join(short) or 'topic'} window"
        return EmergingTopicReport(before, after, [], jaccard_matrix(after, before), "unexplained", reason)
    return compare_topics(before, after, config.jaccard_new_threshold)


def npmi(p1: float, p2: float, p12: float, eps: float = NPMI_EPS) -> float:
    """Normalised PMI with additive smoothing ``eps`` on the joint probability."""
    joint = p12 + eps
    if joint >= 1.0:
        return 1.0
    value = math.log(joint / (p1 * p2)) / -math.log(joint)
    return max(-1.0, min(1.0, value))


def npmi_coherence(topics, reference_docs, eps: float = NPMI_EPS) -> float | None:
    """Mean over topics of the average pairwise NPMI of their keywords.

    Probabilities are document frequencies in ``reference_docs``. Pairs with
    a keyword absent from the reference corpus are skipped; returns None if
    every pair is skipped.
    """
    doc_sets = [set(d) for d in reference_docs]
    n = len(doc_sets)
    if n == 0:
        raise ValueError("reference corpus is empty")
    postings: dict[str, set[int]] = {}
    for i, d in enumerate(doc_sets):
        for w in d:
            postings.setdefault(w, set()).add(i)
    per_topic = []
    for topic in topics:
        kws = topic.keywords if isinstance(topic, Topic) else list(topic)
        scores = []
        for w1, w2 in itertools.combinations(kws, 2):
            if w1 not in postings or w2 not in postings:
                continue
            p1, p2 = len(postings[w1]) / n, len(postings[w2]) / n
            p12 = len(postings[w1] & postings[w2]) / n
            scores.append(npmi(p1, p2, p12, eps))
        if scores:
            per_topic.append(float(np.mean(scores)))
    return float(np.mean(per_topic)) if per_topic else None


def topic_diversity(topics, top_n: int = 25) -> float | None:
    """Share of unique terms among the concatenated top-n keywords of all topics."""
    words = []
    for topic in topics:
        kws = topic.keywords if isinstance(topic, Topic) else list(topic)
        words.extend(kws[:top_n])
    if not words:
        return None
    return len(set(words)) / len(words)
