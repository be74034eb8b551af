"""Parsing raw post files and normalizing text into tokens and daily buckets."""

from __future__ import annotations

import csv
import io
import json
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import IO, Iterable
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .errors import ConfigError, MalformedRecordError

URL_RE = re.compile(r"(?:https?|ftp)://\S+|www\.\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"@\w+")
HASHTAG_RE = re.compile(r"#(\w+)")
# camel-case humps, all-caps runs, lowercase runs and digit runs
HASHTAG_PART_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+|[^\W\d_]+")
WORD_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
# joiners and presentation selectors carry no meaning once emoji are mapped
_EMOJI_NOISE = dict.fromkeys(map(ord, "‍︎️"), " ")


@dataclass(frozen=True)
class RawPost:
    id: str
    timestamp: datetime
    text: str
    lang: str | None = None


@dataclass(frozen=True)
class PreprocessedPost:
    id: str
    day: date
    tokens: tuple[str, ...]
    clean_text: str


@dataclass
class PreprocessConfig:
    time_zone: str = "UTC"
    emoji_map: dict[str, str] = field(default_factory=dict)
    hashtag_wordlist: frozenset[str] = frozenset()
    stopword_list: frozenset[str] = frozenset()
    on_malformed: str = "skip"
    dedupe_exact: bool = False

    def __post_init__(self):
        if self.on_malformed not in ("skip", "fail"):
            raise ConfigError(f"on_malformed must be 'skip' or 'fail', got {self.on_malformed!r}")
        self.zone = resolve_zone(self.time_zone)
        self._emoji_re = None
        if self.emoji_map:
            keys = sorted(self.emoji_map, key=len, reverse=True)
            self._emoji_re = re.compile("|".join(map(re.escape, keys)))


@dataclass
class ParseReport:
    posts: list[RawPost]
    skipped: int = 0
    errors: list[MalformedRecordError] = field(default_factory=list)


def resolve_zone(name: str) -> ZoneInfo:
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError, TypeError) as exc:
        raise ConfigError(f"unknown time zone {name!r}") from exc


def parse_timestamp(value: str) -> datetime:
    text = str(value).strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None or ts.utcoffset() is None:
        raise ValueError(f"timestamp {value!r} has no UTC offset")
    return ts


def _record_to_post(record, line: int) -> RawPost:
    if not isinstance(record, dict):
        raise MalformedRecordError(line, "record is not an object")
    for key in ("id", "timestamp", "text"):
        if record.get(key) is None:
            raise MalformedRecordError(line, f"missing field {key!r}")
    post_id = str(record["id"]).strip()
    if not post_id:
        raise MalformedRecordError(line, "empty id")
    try:
        ts = parse_timestamp(record["timestamp"])
    except ValueError as exc:
        raise MalformedRecordError(line, f"bad timestamp: {exc}") from None
    lang = record.get("lang") or None
    return RawPost(post_id, ts, str(record["text"]), lang)


def _iter_records(stream: IO[str], fmt: str):
    if fmt == "jsonl":
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, MalformedRecordError(lineno, f"invalid JSON: {exc.msg}")
    elif fmt == "csv":
        reader = csv.DictReader(stream)
        for row in reader:
            # header is line 1
            lineno = reader.line_num
            if None in row or any(v is None for v in row.values()):
                yield lineno, MalformedRecordError(lineno, "wrong number of columns")
            else:
                yield lineno, row
    else:
        raise ConfigError(f"unsupported corpus format {fmt!r}")


def parse_posts(stream, fmt: str = "jsonl", on_malformed: str = "skip") -> ParseReport:
    """Parse a JSONL or CSV byte/text stream into RawPosts, preserving order.

    Under ``on_malformed="fail"`` the first bad record raises
    MalformedRecordError; under ``"skip"`` it is counted and dropped.
    """
    if on_malformed not in ("skip", "fail"):
        raise ConfigError(f"on_malformed must be 'skip' or 'fail', got {on_malformed!r}")
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, io.BufferedIOBase) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")
    report = ParseReport(posts=[])
    for lineno, record in _iter_records(stream, fmt):
        try:
            if isinstance(record, MalformedRecordError):
                raise record
            report.posts.append(_record_to_post(record, lineno))
        except MalformedRecordError as err:
            if on_malformed == "fail":
                raise
            report.skipped += 1
            report.errors.append(err)
    return report


def read_corpus(path, fmt: str | None = None, on_malformed: str = "skip") -> ParseReport:
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_posts(fh, fmt, on_malformed)


def bucket_day(timestamp: datetime, zone) -> date:
    """Local calendar date of an instant in the given IANA zone."""
    if isinstance(zone, str):
        zone = resolve_zone(zone)
    if timestamp.tzinfo is None:
        raise ValueError("timestamp must carry a UTC offset")
    return timestamp.astimezone(zone).date()


def _greedy_segment(run: str, wordlist) -> list[str] | None:
    if not wordlist:
        return None
    longest = max(map(len, wordlist))
    out, pos = [], 0
    while pos < len(run):
        for end in range(min(len(run), pos + longest), pos, -1):
            if run[pos:end] in wordlist:
                out.append(run[pos:end])
                pos = end
                break
        else:
            return None
    return out


def split_hashtag(tag: str, wordlist=frozenset()) -> list[str]:
    """Split a hashtag into lowercase words.

    Camel-case and letter/digit boundaries always split. Each alphabetic
    run is then segmented by greedy longest match against ``wordlist``; a
    run with no complete greedy segmentation is kept whole.
    """
    body = tag[1:] if tag.startswith("#") else tag
    parts = HASHTAG_PART_RE.findall(body)
    if not parts:
        return [body.lower()] if body else []
    tokens: list[str] = []
    for part in parts:
        low = part.lower()
        if part.isdigit():
            tokens.append(low)
            continue
        tokens.extend(_greedy_segment(low, wordlist) or [low])
    return tokens


def _is_symbol(ch: str) -> bool:
    return unicodedata.category(ch) == "So"


def tokenize(text: str) -> list[str]:
    """Words (letters/digits, inner apostrophes kept) and single symbol characters."""
    tokens = []
    pos = 0
    for m in WORD_RE.finditer(text):
        tokens.extend(ch for ch in text[pos:m.start()] if _is_symbol(ch))
        tokens.append(m.group())
        pos = m.end()
    tokens.extend(ch for ch in text[pos:] if _is_symbol(ch))
    return [t.lower() for t in tokens]


def normalize_text(text: str, config: PreprocessConfig) -> list[str]:
    text = URL_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    if config._emoji_re is not None:
        text = config._emoji_re.sub(lambda m: f" {config.emoji_map[m.group()]} ", text)
    text = text.translate(_EMOJI_NOISE)
    text = HASHTAG_RE.sub(lambda m: " " + " ".join(split_hashtag(m.group(), config.hashtag_wordlist)) + " ", text)
    # stray '#'/'@' that did not form a tag or mention are plain punctuation
    return tokenize(text.replace("#", " ").replace("@", " "))


def preprocess(post: RawPost, config: PreprocessConfig) -> PreprocessedPost:
    tokens = tuple(normalize_text(post.text, config))
    return PreprocessedPost(
        id=post.id,
        day=bucket_day(post.timestamp, config.zone),
        tokens=tokens,
        clean_text=" ".join(tokens),
    )


def preprocess_all(posts: Iterable[RawPost], config: PreprocessConfig) -> list[PreprocessedPost]:
    posts = list(posts)
    out = [preprocess(p, config) for p in posts]
    if config.dedupe_exact:
        seen = set()
        kept = []
        for raw, pp in zip(posts, out):
            key = (pp.day, raw.text)
            if key in seen:
                continue
            seen.add(key)
            kept.append(pp)
        out = kept
    return out


def load_emoji_table(path) -> dict[str, str]:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("//"):
                continue
            emoji, sep, desc = line.partition("\t")
            if not sep or not emoji or not desc.strip():
                raise ConfigError(f"{path}:{lineno}: expected 'emoji<TAB>description'")
            table[emoji] = desc.strip().replace("_", " ")
    return table


def load_wordlist(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip() and not w.startswith("#"))
