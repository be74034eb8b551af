"""Declarative pipeline configuration (YAML)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .changepoint import DetectorConfig, NIGPrior
from .errors import ConfigError
from .ingest import PreprocessConfig, load_emoji_table, load_wordlist, resolve_zone
from .labeling import DDRConfig
from .topics import DEFAULT_STOPWORDS, TopicConfig

LABELERS = ("precomputed", "lexicon", "ddr")
TTESTS = ("welch", "pooled")

PATH_KEYS = (
    "corpus", "labels", "lexicon", "vectors", "doc_vectors", "verdicts",
    "output", "emoji_table", "wordlist", "stopwords",
)


@dataclass
class Paths:
    corpus: Path | None = None
    corpus_format: str | None = None
    labels: Path | None = None
    lexicon: Path | None = None
    vectors: Path | None = None
    doc_vectors: Path | None = None
    verdicts: Path | None = None
    output: Path = Path("out")
    emoji_table: Path | None = None
    wordlist: Path | None = None
    stopwords: Path | None = None


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    labeler: str = "lexicon"
    seed: int = 0
    time_zone: str = "UTC"
    on_malformed: str = "skip"
    dedupe_exact: bool = False
    ttest: str = "welch"
    grouping_window_days: int = 2
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    topic: TopicConfig = field(default_factory=TopicConfig)
    ddr: DDRConfig = field(default_factory=DDRConfig)

    def __post_init__(self):
        if self.labeler not in LABELERS:
            raise ConfigError(f"labeler must be one of {LABELERS}, got {self.labeler!r}")
        if self.ttest not in TTESTS:
            raise ConfigError(f"ttest must be one of {TTESTS}, got {self.ttest!r}")
        if self.on_malformed not in ("skip", "fail"):
            raise ConfigError("on_malformed must be 'skip' or 'fail'")
        resolve_zone(self.time_zone)
        needed = {"precomputed": ("labels",), "lexicon": ("lexicon",), "ddr": ("lexicon", "vectors")}
        for key in needed[self.labeler]:
            if getattr(self.paths, key) is None:
                raise ConfigError(f"labeler {self.labeler!r} needs paths.{key}")
        # one run seed drives every random choice
        self.detector = dataclasses.replace(self.detector, rng_seed=self.seed)
        self.topic = dataclasses.replace(self.topic, rng_seed=self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["paths"] = {k: (str(v) if isinstance(v, Path) else v) for k, v in d["paths"].items()}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def preprocess_config(self) -> PreprocessConfig:
        p = self.paths
        return PreprocessConfig(
            time_zone=self.time_zone,
            emoji_map=load_emoji_table(p.emoji_table) if p.emoji_table else {},
            hashtag_wordlist=load_wordlist(p.wordlist) if p.wordlist else frozenset(),
            stopword_list=self.stopwords(),
            on_malformed=self.on_malformed,
            dedupe_exact=self.dedupe_exact,
        )

    def stopwords(self) -> frozenset[str]:
        if self.paths.stopwords:
            return load_wordlist(self.paths.stopwords)
        return DEFAULT_STOPWORDS


def _build(cls, data: dict | None, where: str):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: dict[str, Any], base_dir: Path | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    raw = dict(raw or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    base_dir = Path(base_dir or ".")

    paths_raw = dict(raw.pop("paths", None) or {})
    if "output" in overrides:
        paths_raw["output"] = overrides.pop("output")
    paths = _build(Paths, paths_raw, "paths")
    for key in PATH_KEYS:
        value = getattr(paths, key)
        if value is not None:
            value = Path(value).expanduser()
            setattr(paths, key, value if value.is_absolute() else (base_dir / value))

    detector_raw = dict(raw.pop("detector", None) or {})
    if isinstance(detector_raw.get("bocpd_prior"), dict):
        detector_raw["bocpd_prior"] = _build(NIGPrior, detector_raw["bocpd_prior"], "detector.bocpd_prior")
    detector = _build(DetectorConfig, detector_raw, "detector")
    topic_raw = dict(raw.pop("topic", None) or {})
    if "n_topics" in overrides:
        topic_raw["n_topics"] = overrides.pop("n_topics")
    topic = _build(TopicConfig, topic_raw, "topic")
    ddr = _build(DDRConfig, raw.pop("ddr", None), "ddr")
    raw.update(overrides)
    return _build(PipelineConfig, {**raw, "paths": paths, "detector": detector, "topic": topic, "ddr": ddr}, "config")


def load_config(path, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw, path.parent, overrides)
