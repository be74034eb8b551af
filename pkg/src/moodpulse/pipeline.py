"""Stage-file pipeline: every stage reads the previous stages' files from a
work directory and writes its own, so any stage can be rerun or fed with
externally produced files (e.g. labels from another model)."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import platform
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import date, timedelta
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import scipy
import sklearn

from . import __version__
from .categories import CATEGORIES
from .changepoint import ChangePoint, detect_series, task_seed
from .config import PipelineConfig
from .errors import InsufficientDataError, MoodpulseError, StageError
from .evaluation import evaluate, read_verdicts
from .ingest import PreprocessedPost, preprocess_all, read_corpus
from .labeling import DDRLabeler, Lexicon, WordVectorTable, label_with_lexicon, load_labels, write_labels
from .reaction import format_pct, long_term_change, short_term_change, stars
from .series import DailyAffectSeries, build_daily_fractions, impute_missing, read_series_csv, write_series_csv
from .topics import emerging_topics, npmi_coherence, topic_diversity

log = logging.getLogger(__name__)

STAGES = ("ingest", "label", "series", "detect", "measure", "explain", "evaluate", "report")
EXIT_CODES = {"ingest": 3, "label": 4, "series": 5, "detect": 6, "measure": 7,
              "explain": 8, "evaluate": 9, "report": 9}
CONFIG_EXIT = 2

POSTS_FILE = "posts.jsonl"
INGEST_FILE = "ingest.json"
LABELS_FILE = "labels.csv"
SERIES_FILE = "timeseries.csv"
CHANGEPOINTS_FILE = "changepoints.json"
REACTIONS_FILE = "reactions.json"
TOPICS_FILE = "topics.json"
EVAL_FILE = "eval.json"
EVENTS_FILE = "events.csv"
PLOTS_DIR = "plots"
MARKERS_FILE = "changepoints.csv"
MANIFEST_FILE = "manifest.json"
QUARANTINE_DIR = "quarantine"


# ---------------------------------------------------------------- file helpers

def _r6(v):
    if v is None:
        return None
    v = float(v)
    return round(v, 6) if math.isfinite(v) else None


def _atomic_write(path: Path, writer: Callable) -> None:
    """Write via a sibling temp file so a failed stage never leaves a half file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    text = json.dumps(obj, ensure_ascii=False, indent=2, allow_nan=False) + "\n"

    def _w(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    _atomic_write(Path(path), _w)


def read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_posts_jsonl(path: Path, posts: Iterable[PreprocessedPost]) -> None:
    def _w(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for p in posts:
                rec = {"id": p.id, "day": p.day.isoformat(), "tokens": list(p.tokens)}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    _atomic_write(Path(path), _w)


def read_posts_jsonl(path: Path) -> list[PreprocessedPost]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            tokens = tuple(rec["tokens"])
            out.append(PreprocessedPost(rec["id"], date.fromisoformat(rec["day"]), tokens, " ".join(tokens)))
    return out


def read_changepoints(path: Path) -> list[ChangePoint]:
    return [ChangePoint.from_json(d) for d in read_json(path)]


def load_doc_vectors(path) -> dict[str, np.ndarray]:
    """``post_id v1 ... vd`` per line."""
    vectors, dim = {}, None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            vec = np.array([float(x) for x in parts[1:]])
            if dim is None:
                dim = len(vec)
            if len(vec) != dim or dim == 0:
                raise MoodpulseError(f"{path}:{lineno}: expected {dim} vector components")
            vectors[parts[0]] = vec
    return vectors


def _fan_out(fn, items, workers: int) -> list:
    """Map ``fn`` over items, preserving input order whatever the worker count."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------- stages

def stage_ingest(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    if cfg.paths.corpus is None:
        raise MoodpulseError("no corpus path configured (paths.corpus)")
    report = read_corpus(cfg.paths.corpus, cfg.paths.corpus_format, cfg.on_malformed)
    posts = preprocess_all(report.posts, cfg.preprocess_config())
    if not posts:
        raise InsufficientDataError("corpus holds no valid posts")
    write_posts_jsonl(work / POSTS_FILE, posts)
    stats = {
        "n_records": len(report.posts) + report.skipped,
        "n_valid": len(report.posts),
        "n_posts": len(posts),
        "skipped_malformed": report.skipped,
        "dropped_duplicates": len(report.posts) - len(posts),
        "errors": [str(e) for e in report.errors[:50]],
    }
    write_json(work / INGEST_FILE, stats)
    return stats


def _labeler(cfg: PipelineConfig):
    lexicon = Lexicon.from_file(cfg.paths.lexicon)
    if cfg.labeler == "lexicon":
        return lambda tokens: label_with_lexicon(tokens, lexicon)
    return DDRLabeler(lexicon, WordVectorTable.from_file(cfg.paths.vectors), cfg.ddr)


def stage_label(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    posts = read_posts_jsonl(work / POSTS_FILE)
    ids = [p.id for p in posts]
    if cfg.labeler == "precomputed":
        loaded = load_labels(cfg.paths.labels, ids)
        if loaded.unknown_ids or loaded.unlabeled:
            log.warning("label file: %d rows for unknown ids dropped, %d posts without labels",
                        loaded.unknown_ids, loaded.unlabeled)
        vectors = [loaded.labels[i] for i in ids]
    else:
        fn = _labeler(cfg)
        vectors = [fn(p.tokens) for p in posts]
    _atomic_write(work / LABELS_FILE, lambda tmp: write_labels(tmp, ids, vectors))
    return {"n_labeled": len(ids)}


def stage_series(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    posts = read_posts_jsonl(work / POSTS_FILE)
    labels = load_labels(work / LABELS_FILE, [p.id for p in posts]).labels
    series = build_daily_fractions((p.day, labels[p.id]) for p in posts)
    _atomic_write(work / SERIES_FILE, lambda tmp: write_series_csv(tmp, series))
    first = next(iter(series.values()))
    return {"n_days": len(first), "n_missing_days": int(first.missing.sum())}


def _imputed(work: Path) -> dict[str, DailyAffectSeries]:
    return {c: impute_missing(s) for c, s in read_series_csv(work / SERIES_FILE).items()}


def stage_detect(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    series = _imputed(work)
    found = _fan_out(lambda s: detect_series(s, cfg.detector), series.values(), workers)
    points = sorted((p for pts in found for p in pts), key=lambda p: (p.date, p.category, p.method))
    write_json(work / CHANGEPOINTS_FILE, [p.to_json() for p in points])
    return {"n_changepoints": len(points)}


def _short_json(series, cp: ChangePoint) -> dict:
    try:
        st = short_term_change(series, cp.date)
    except InsufficientDataError as exc:
        return {"status": "insufficient_data", "reason": str(exc)}
    return {
        "status": "ok",
        "pct_change": _r6(st.pct_change),
        "display": format_pct(st.pct_change) + stars(st.p_value),
        "beta": [_r6(b) for b in st.fit.beta],
        "std_err": [_r6(s) for s in st.fit.std_err],
        "p_value": _r6(st.p_value),
        "stars": stars(st.p_value),
        "window_mean": _r6(st.fit.segment_mean),
        "imputed_in_window": st.imputed_in_window,
    }


def _long_json(series, cp: ChangePoint, test: str) -> dict:
    try:
        lt = long_term_change(series, cp.date, test)
    except InsufficientDataError as exc:
        return {"status": "insufficient_data", "reason": str(exc)}
    return {
        "status": "ok",
        "test": lt.test,
        "baseline_mean": _r6(lt.baseline_mean),
        "post_mean": _r6(lt.post_mean),
        "pct_change": _r6(lt.pct_change),
        "display": format_pct(lt.pct_change) + stars(lt.p_value),
        "t_stat": _r6(lt.t_stat) if math.isfinite(lt.t_stat) else ("inf" if lt.t_stat > 0 else "-inf"),
        "dof": _r6(lt.dof),
        "p_value": _r6(lt.p_value),
        "stars": stars(lt.p_value),
        "imputed_in_window": lt.imputed_in_window,
    }


def stage_measure(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    series = _imputed(work)
    points = read_changepoints(work / CHANGEPOINTS_FILE)

    def one(cp: ChangePoint) -> dict:
        s = series[cp.category]
        return {
            **cp.to_json(),
            "short_term": _short_json(s, cp),
            "long_term": _long_json(s, cp, cfg.ttest),
        }

    records = _fan_out(one, points, workers)
    write_json(work / REACTIONS_FILE, records)
    return {"n_measured": sum(r["short_term"]["status"] == "ok" for r in records)}


def _window_docs(posts, labels, cats: list[str], first: date, last: date, vectors):
    idx = [CATEGORIES.index(c) for c in cats]
    docs, vecs = [], []
    for p in posts:
        if first <= p.day <= last and labels[p.id][idx].any():
            docs.append(list(p.tokens))
            if vectors is not None:
                vecs.append(vectors.get(p.id))
    if vectors is None:
        return docs, None
    dim = len(next(iter(vectors.values())))
    return docs, np.array([v if v is not None else np.zeros(dim) for v in vecs]).reshape(len(docs), dim)


def stage_explain(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    posts = read_posts_jsonl(work / POSTS_FILE)
    labels = load_labels(work / LABELS_FILE, [p.id for p in posts]).labels
    points = read_changepoints(work / CHANGEPOINTS_FILE)
    vectors = load_doc_vectors(cfg.paths.doc_vectors) if cfg.paths.doc_vectors else None
    stopwords = cfg.stopwords()
    w = cfg.topic.window_days
    mw = cfg.detector.merge_window_days

    def one(cp: ChangePoint) -> dict:
        rec = {**cp.to_json()}
        if cp.direction == "decrease":
            # a dip is explained through the categories that rose alongside it
            cats = sorted({q.category for q in points if q.direction == "increase"
                           and q.category != cp.category and abs((q.date - cp.date).days) <= mw},
                          key=CATEGORIES.index)
            if not cats:
                return {**rec, "explained_by": [], "status": "unexplained_dip",
                        "reason": "no category rose within the merge window", "before": [], "after": [],
                        "emerging": []}
        else:
            cats = [cp.category]
        before, bv = _window_docs(posts, labels, cats, cp.date - timedelta(days=w), cp.date - timedelta(days=1), vectors)
        after, av = _window_docs(posts, labels, cats, cp.date, cp.date + timedelta(days=w - 1), vectors)
        tcfg = dataclasses.replace(cfg.topic, rng_seed=task_seed(cfg.seed, f"{cp.category}@{cp.date.isoformat()}"))
        report = emerging_topics(before, after, tcfg, bv, av, stopwords)
        out = {
            **rec,
            "explained_by": cats,
            "status": report.status,
            "reason": report.reason,
            "n_docs_before": len(before),
            "n_docs_after": len(after),
            "before": [t.to_json() for t in report.topics_before],
            "after": [t.to_json() for t in report.topics_after],
            "emerging": [t.to_json() for t in report.emerging_topics],
            "jaccard": [[_r6(v) for v in row] for row in report.jaccard.tolist()],
        }
        if report.topics_after and after:
            out["npmi_after"] = _r6(npmi_coherence(report.topics_after, after))
            out["diversity_after"] = _r6(topic_diversity(report.topics_after))
        return out

    records = _fan_out(one, points, workers)
    write_json(work / TOPICS_FILE, records)
    return {"n_explained": sum(bool(r["emerging"]) for r in records)}


def stage_evaluate(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    points = read_changepoints(work / CHANGEPOINTS_FILE)
    verdicts = read_verdicts(cfg.paths.verdicts) if cfg.paths.verdicts else None
    report, clusters = evaluate(points, verdicts, cfg.grouping_window_days)
    per_cat = {c: 0 for c in CATEGORIES}
    for p in points:
        per_cat[p.category] += 1
    write_json(work / EVAL_FILE, {**report.to_json(), "changepoints_per_category": per_cat})

    def _w(tmp):
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["event_id", "start_date", "end_date", "n_changepoints", "categories", "verified"])
            for c in clusters:
                cats = ";".join(sorted(c.categories, key=CATEGORIES.index))
                flag = "" if c.verified is None else int(c.verified)
                wr.writerow([c.event_id, c.start.isoformat(), c.end.isoformat(), len(c.changepoints), cats, flag])

    _atomic_write(work / EVENTS_FILE, _w)
    return {"n_events": len(clusters)}


def export_plot_data(series: dict[str, DailyAffectSeries], changepoints: Iterable[ChangePoint], outdir) -> list[Path]:
    """One ``<category>.csv`` (date, fraction; blank for missing days) per
    series plus a ``changepoints.csv`` marker file."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for cat in CATEGORIES:
        if cat not in series:
            continue
        s = series[cat]

        def _w(tmp, s=s):
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(["date", "fraction"])
                for day, v in zip(s.dates, s.values):
                    wr.writerow([day.isoformat(), "" if np.isnan(v) else repr(float(v))])

        path = outdir / f"{cat}.csv"
        _atomic_write(path, _w)
        written.append(path)

    points = sorted(changepoints, key=lambda p: (p.date, p.category, p.method))

    def _wm(tmp):
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["category", "date", "method", "confidence", "direction"])
            for p in points:
                wr.writerow([p.category, p.date.isoformat(), p.method, f"{p.confidence:.6f}", p.direction])

    path = outdir / MARKERS_FILE
    _atomic_write(path, _wm)
    written.append(path)
    return written


def read_plot_csv(path) -> tuple[list[date], np.ndarray]:
    days, vals = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            days.append(date.fromisoformat(row["date"]))
            vals.append(float(row["fraction"]) if row["fraction"] else np.nan)
    return days, np.array(vals, dtype=float)


def stage_report(cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    series = read_series_csv(work / SERIES_FILE)
    points = read_changepoints(work / CHANGEPOINTS_FILE)
    files = export_plot_data(series, points, work / PLOTS_DIR)
    return {"n_plot_files": len(files)}


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "label": stage_label,
    "series": stage_series,
    "detect": stage_detect,
    "measure": stage_measure,
    "explain": stage_explain,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_stage(name: str, cfg: PipelineConfig, work: Path, workers: int = 1) -> dict:
    """Run one stage in ``work``; any failure is re-raised as StageError."""
    log.info("stage %s", name)
    try:
        return STAGE_FUNCS[name](cfg, Path(work), workers)
    except StageError:
        raise
    except (MoodpulseError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise StageError(name, exc) from exc


# --------------------------------------------------------------------- runs

def versions() -> dict:
    return {
        "moodpulse": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _files_under(root: Path) -> list[Path]:
    return sorted(p for p in root.rglob("*") if p.is_file())


def write_manifest(cfg: PipelineConfig, work: Path, stats: dict) -> None:
    files = {p.relative_to(work).as_posix(): _sha256(p) for p in _files_under(work) if p.name != MANIFEST_FILE}
    write_json(work / MANIFEST_FILE, {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "versions": versions(),
        "config": cfg.to_dict(),
        "stages": stats,
        "outputs": files,
    })


def run_pipeline(cfg: PipelineConfig, workers: int = 1) -> tuple[int, str | None]:
    """Run every stage in a private staging directory.

    On success the staged files replace those in the output directory and
    (0, None) is returned. On failure partial outputs, if any, are moved to
    ``<output>/quarantine`` and (stage exit code, message) is returned; a
    failure that produced nothing leaves no outputs at all.
    """
    out = Path(cfg.paths.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.staging-", dir=out.parent))
    stats = {}
    try:
        for name in STAGES:
            stats[name] = run_stage(name, cfg, staging, workers)
        write_manifest(cfg, staging, stats)
    except StageError as exc:
        if _files_under(staging):
            quarantine = out / QUARANTINE_DIR
            if quarantine.exists():
                shutil.rmtree(quarantine)
            out.mkdir(parents=True, exist_ok=True)
            shutil.move(str(staging), str(quarantine))
        else:
            shutil.rmtree(staging, ignore_errors=True)
        return EXIT_CODES[exc.stage], str(exc)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    out.mkdir(parents=True, exist_ok=True)
    for item in sorted(staging.iterdir()):
        target = out / item.name
        if target.is_dir():
            shutil.rmtree(target)
        os.replace(item, target)
    staging.rmdir()
    return 0, None
