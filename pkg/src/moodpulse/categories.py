"""The 21 affect categories: 11 emotions plus 10 moral-foundation poles."""

from __future__ import annotations

import numpy as np

EMOTIONS = (
    "anticipation",
    "joy",
    "love",
    "trust",
    "optimism",
    "anger",
    "disgust",
    "fear",
    "sadness",
    "pessimism",
    "surprise",
)

MORALS = (
    "care",
    "harm",
    "fairness",
    "cheating",
    "loyalty",
    "betrayal",
    "authority",
    "subversion",
    "purity",
    "degradation",
)

CATEGORIES = EMOTIONS + MORALS
N_CATEGORIES = len(CATEGORIES)
INDEX = {name: i for i, name in enumerate(CATEGORIES)}


def kind(name: str) -> str:
    if name in EMOTIONS:
        return "emotion"
    if name in MORALS:
        return "moral"
    raise KeyError(f"unknown affect category: {name!r}")


def index_of(name: str) -> int:
    try:
        return INDEX[name]
    except KeyError:
        raise KeyError(f"unknown affect category: {name!r}") from None


def empty_vector() -> np.ndarray:
    return np.zeros(N_CATEGORIES, dtype=bool)


def vector_from(names) -> np.ndarray:
    """Build a label vector with the given categories switched on."""
    vec = empty_vector()
    for name in names:
        vec[index_of(name)] = True
    return vec


def names_on(vec) -> list[str]:
    return [CATEGORIES[i] for i in np.flatnonzero(np.asarray(vec, dtype=bool))]
