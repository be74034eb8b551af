"""A synthetic corpus with one known event, for demos and end-to-end checks.

Posts are drawn from a word-frequency model: each post picks one everyday
theme and a few of its words, adds background words (frequent function
words and rare long-tail words) and, with fixed probabilities, cue words
from a small affect lexicon. From ``event_day`` on, an event intensity
ramps up: anger cues become more frequent in every post and a minority of
posts talk about an earthquake, nearly all of them angrily.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np
import yaml

THEMES = {
    "weather": ["rain", "sunny", "forecast", "cloudy", "umbrella", "humid", "breeze", "storm"],
    "food": ["pizza", "coffee", "breakfast", "recipe", "bakery", "noodles", "salad", "dinner"],
    "sports": ["match", "goal", "coach", "league", "playoffs", "striker", "stadium", "referee"],
    "traffic": ["commute", "highway", "bus", "subway", "delay", "parking", "bridge", "lane"],
    "music": ["concert", "album", "guitar", "playlist", "band", "song", "festival", "drummer"],
    "work": ["meeting", "deadline", "office", "project", "email", "boss", "shift", "report"],
}
# background vocabulary: Zipf-weighted function words, plus a flat long
# tail of rare words that seldom repeat across posts
FUNCTION_WORDS = [
    "the", "to", "and", "a", "i", "is", "it", "in", "of", "this", "so", "my", "that", "for", "on",
    "we", "just", "be", "with", "all", "was", "you", "at", "not", "but", "they", "are", "out", "today", "really",
]
_SYLLABLES = ["ba", "ko", "ri", "ten", "lu", "sa", "mi", "dor", "pe", "ga", "vi", "nu", "fal", "che", "to", "rem"]
EVENT_CORE = ["quake", "tremor", "magnitude"]
EVENT_EXTRA = ["shaking", "epicenter", "aftershock", "buildings", "damage"]

# a toy lexicon in the NRC layout, one or more cue words per category
LEXICON = {
    "anger": ["furious", "angry", "outraged", "rage", "livid"],
    "anticipation": ["waiting", "soon", "expect"],
    "disgust": ["gross", "disgusting"],
    "fear": ["scared", "afraid", "terrified"],
    "joy": ["happy", "delighted", "glad"],
    "love": ["adore", "lovely"],
    "optimism": ["hopeful", "optimistic"],
    "pessimism": ["hopeless", "doomed"],
    "sadness": ["sad", "grief", "heartbroken"],
    "surprise": ["shocked", "unexpected"],
    "trust": ["reliable", "trust"],
    "care": ["protect", "kindness"],
    "harm": ["hurt", "cruel"],
    "fairness": ["fair", "justice"],
    "cheating": ["cheat", "fraud"],
    "loyalty": ["loyal", "solidarity"],
    "betrayal": ["betrayed", "traitor"],
    "authority": ["law", "order"],
    "subversion": ["rebel", "defy"],
    "purity": ["pure", "sacred"],
    "degradation": ["filthy", "sinful"],
}
BASE_AFFECT_P = 0.02  # every non-anger category
BASE_ANGER_P = 0.35
PEAK_ANGER_P = 0.97  # theme posts at full event intensity
EVENT_ANGER_P = 0.97
PEAK_EVENT_SHARE = 0.30
INTENSITY_FLOOR = 0.35


@dataclass
class EventFixture:
    corpus: Path
    lexicon: Path
    config: Path
    start: date
    event_date: date


def event_intensity(day: int, event_day: int) -> float:
    """0 before the event, a four-day ramp to 1, then a fade towards a
    lasting floor (the aftermath keeps people upset)."""
    k = day - event_day
    if k < 0:
        return 0.0
    ramp = [0.40, 0.63, 0.83, 1.00]
    if k < len(ramp):
        return ramp[k]
    return INTENSITY_FLOOR + (1.0 - INTENSITY_FLOOR) * 0.7 ** (k - len(ramp) + 1)


def _tail_words(n: int = 1000) -> list[str]:
    # fixed pseudo-words, independent of the run seed
    rng = np.random.default_rng(12345)
    words = set()
    while len(words) < n:
        words.add("".join(rng.choice(_SYLLABLES, size=rng.integers(2, 4))))
    return sorted(words)


def _round(x: float, rng: np.random.Generator) -> int:
    """Stochastic rounding: floor(x) plus one with probability frac(x)."""
    lo = int(np.floor(x))
    return lo + int(rng.random() < x - lo)


def _zipf(n: int) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1)
    return w / w.sum()


def generate_posts(seed: int = 0, n_posts: int = 2000, n_days: int = 60, event_day: int = 40,
                   start: date = date(2021, 3, 1)) -> list[dict]:
    rng = np.random.default_rng(seed)
    weights = np.array([1.5 if event_day <= d < event_day + 7 else 1.0 for d in range(n_days)])
    per_day = rng.multinomial(n_posts, weights / weights.sum())
    themes = sorted(THEMES)
    tail = _tail_words()
    p_func = _zipf(len(FUNCTION_WORDS))
    posts = []
    for d, count in enumerate(per_day):
        level = event_intensity(d, event_day)
        anger_p = BASE_ANGER_P + (PEAK_ANGER_P - BASE_ANGER_P) * level
        # daily quotas keep the injected profile from drowning in binomial
        # noise at a few dozen posts a day; which posts get them is random
        n_event = _round(PEAK_EVENT_SHARE * level * count, rng)
        is_event = rng.permutation(np.arange(count) < n_event)
        angry = np.zeros(count, dtype=bool)
        for mask, p in ((is_event, EVENT_ANGER_P), (~is_event, anger_p)):
            idx = np.flatnonzero(mask)
            angry[rng.choice(idx, size=_round(p * len(idx), rng), replace=False)] = True
        seconds = np.sort(rng.integers(0, 86400, size=count))
        for i, s in enumerate(seconds):
            words = list(rng.choice(FUNCTION_WORDS, size=rng.integers(3, 7), p=p_func))
            words += list(rng.choice(tail, size=rng.integers(1, 3)))
            if is_event[i]:
                core = list(EVENT_CORE)
                if rng.random() < 0.3:
                    core.pop(rng.integers(len(core)))
                words += core + list(rng.choice(EVENT_EXTRA, size=rng.integers(0, 3), replace=False))
            else:
                theme = THEMES[themes[rng.integers(len(themes))]]
                words += list(rng.choice(theme, size=rng.integers(3, 6), replace=False))
            if angry[i]:
                words.append(rng.choice(LEXICON["anger"]))
            for cat in sorted(LEXICON):
                if cat != "anger" and rng.random() < BASE_AFFECT_P:
                    words.append(rng.choice(LEXICON[cat]))
            rng.shuffle(words)
            text = " ".join(str(w) for w in words)
            if rng.random() < 0.1:
                text += " https://example.org/x" + str(int(rng.integers(1000)))
            if rng.random() < 0.1:
                text = "@friend" + str(int(rng.integers(100))) + " " + text
            ts = datetime.combine(start + timedelta(days=d), time(), tzinfo=timezone.utc) + timedelta(seconds=int(s))
            posts.append({"id": f"p{len(posts) + 1:05d}", "timestamp": ts.isoformat(), "text": text})
    return posts


def write_lexicon(path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for cat in sorted(LEXICON):
            for word in LEXICON[cat]:
                fh.write(f"{word}\t{cat}\t1\n")


def write_event_fixture(outdir, seed: int = 0, n_posts: int = 2000, n_days: int = 60, event_day: int = 40,
                        start: date = date(2021, 3, 1), output: str = "out") -> EventFixture:
    """Write corpus.jsonl, lexicon.tsv, a verdict file and config.yaml into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus = outdir / "corpus.jsonl"
    with open(corpus, "w", encoding="utf-8", newline="\n") as fh:
        for post in generate_posts(seed, n_posts, n_days, event_day, start):
            fh.write(json.dumps(post, ensure_ascii=False) + "\n")
    lexicon = outdir / "lexicon.tsv"
    write_lexicon(lexicon)
    event_date = start + timedelta(days=event_day)
    verdicts = outdir / "verdicts.csv"
    with open(verdicts, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["event_id", "start_date", "end_date", "verified", "description"])
        wr.writerow(["quake", (event_date - timedelta(days=2)).isoformat(),
                     (event_date + timedelta(days=3)).isoformat(), 1, "injected earthquake"])
        # anything else detected in the corpus is noise by construction
        wr.writerow(["noise", start.isoformat(), (start + timedelta(days=n_days)).isoformat(), 0, "background"])
    config = outdir / "config.yaml"
    with open(config, "w", encoding="utf-8") as fh:
        yaml.safe_dump({
            "seed": seed,
            "labeler": "lexicon",
            "paths": {"corpus": "corpus.jsonl", "lexicon": "lexicon.tsv", "verdicts": "verdicts.csv",
                      "output": output},
        }, fh, sort_keys=False)
    return EventFixture(corpus, lexicon, config, start, event_date)
