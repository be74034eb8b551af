import json
import shutil
from datetime import date
from pathlib import Path

import numpy as np
import pytest
import yaml
from numpy.testing import assert_array_equal

from moodpulse.categories import CATEGORIES
from moodpulse.changepoint import CUSUM, ChangePoint
from moodpulse.cli import main
from moodpulse.config import config_from_dict, load_config
from moodpulse.errors import ConfigError
from moodpulse.pipeline import (
    CHANGEPOINTS_FILE,
    EVAL_FILE,
    MANIFEST_FILE,
    MARKERS_FILE,
    QUARANTINE_DIR,
    REACTIONS_FILE,
    SERIES_FILE,
    STAGES,
    TOPICS_FILE,
    export_plot_data,
    read_plot_csv,
)
from moodpulse.series import DailyAffectSeries
from moodpulse.synthetic import write_event_fixture

REPORT_FILES = [SERIES_FILE, CHANGEPOINTS_FILE, REACTIONS_FILE, TOPICS_FILE, EVAL_FILE]


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    write_event_fixture(d, seed=1, n_posts=1200)
    return d


@pytest.fixture(scope="module")
def full_run(fixture_dir):
    assert main(["run", "--config", str(fixture_dir / "config.yaml")]) == 0
    return fixture_dir / "out"


def test_run_writes_reports_and_manifest(full_run):
    for name in REPORT_FILES + [MANIFEST_FILE, "events.csv"]:
        assert (full_run / name).is_file(), name
    manifest = json.loads((full_run / MANIFEST_FILE).read_text())
    assert manifest["seed"] == 1
    assert len(manifest["config_hash"]) == 64
    assert set(manifest["stages"]) == set(STAGES)
    assert not (full_run / QUARANTINE_DIR).exists()
    assert len(list((full_run / "plots").glob("*.csv"))) == 22


def test_json_outputs_use_iso_dates_and_six_decimals(full_run):
    cps = json.loads((full_run / CHANGEPOINTS_FILE).read_text(encoding="utf-8"))
    for p in cps:
        date.fromisoformat(p["date"])
        assert round(p["confidence"], 6) == p["confidence"]
    reactions = json.loads((full_run / REACTIONS_FILE).read_text(encoding="utf-8"))
    assert len(reactions) == len(cps)


def test_rerun_is_byte_identical_including_parallel(fixture_dir, full_run, tmp_path):
    cfg = str(fixture_dir / "config.yaml")
    again = tmp_path / "again"
    par = tmp_path / "par"
    assert main(["run", "--config", cfg, "--out", str(again)]) == 0
    assert main(["run", "--config", cfg, "--out", str(par), "--workers", "4"]) == 0
    reference = _tree(full_run)
    # the manifest records the output path, which differs here by design
    for tree in (_tree(again), _tree(par)):
        assert set(tree) == set(reference)
        for name in reference:
            if name != MANIFEST_FILE:
                assert tree[name] == reference[name], name


def test_stage_by_stage_matches_run(fixture_dir, full_run, tmp_path):
    out = tmp_path / "staged"
    cfg = str(fixture_dir / "config.yaml")
    for stage in STAGES:
        assert main([stage, "--config", cfg, "--out", str(out)]) == 0, stage
    ref = _tree(full_run)
    for name, data in _tree(out).items():
        assert data == ref[name], name


def test_precomputed_labels_reproduce_lexicon_run(fixture_dir, full_run, tmp_path):
    raw = yaml.safe_load((fixture_dir / "config.yaml").read_text())
    raw["labeler"] = "precomputed"
    raw["paths"]["labels"] = str(full_run / "labels.csv")
    raw["paths"]["output"] = str(tmp_path / "pre")
    cfg_path = tmp_path / "pre.yaml"
    cfg_path.write_text(yaml.safe_dump(raw))
    for name in fixture_dir.iterdir():
        if name.suffix in (".jsonl", ".tsv", ".csv"):
            shutil.copy(name, tmp_path / name.name)
    assert main(["run", "--config", str(cfg_path)]) == 0
    for name in (SERIES_FILE, CHANGEPOINTS_FILE):
        assert (tmp_path / "pre" / name).read_bytes() == (full_run / name).read_bytes()


def test_missing_corpus_exits_ingest_with_no_outputs(tmp_path):
    cfg = tmp_path / "c.yaml"
    (tmp_path / "lex.tsv").write_text("angry\tanger\n")
    cfg.write_text(yaml.safe_dump({"paths": {"corpus": "nope.jsonl", "lexicon": "lex.tsv", "output": "out"}}))
    assert main(["run", "--config", str(cfg)]) == 3
    assert not (tmp_path / "out").exists()
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".")] == []


def test_late_failure_is_quarantined(fixture_dir, tmp_path):
    for name in ("corpus.jsonl", "lexicon.tsv", "config.yaml"):
        shutil.copy(fixture_dir / name, tmp_path / name)
    (tmp_path / "verdicts.csv").write_text("event_id,start\nx,2021-01-01\n")
    assert main(["run", "--config", str(tmp_path / "config.yaml")]) == 9
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == [QUARANTINE_DIR]
    assert (out / QUARANTINE_DIR / CHANGEPOINTS_FILE).is_file()


def test_config_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("labeler: magic\npaths: {corpus: c.jsonl}\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 2
    bad.write_text("paths: {corpus: c.jsonl, lexicon: l.tsv}\nsurprise: 1\n")
    assert main(["detect", "--config", str(bad)]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_cli_overrides(fixture_dir):
    cfg = load_config(fixture_dir / "config.yaml", {"seed": 9, "n_topics": 3, "ttest": "pooled",
                                                    "dedupe_exact": True, "output": "/tmp/x"})
    assert cfg.seed == 9 and cfg.detector.rng_seed == 9 and cfg.topic.rng_seed == 9
    assert cfg.topic.n_topics == 3 and cfg.ttest == "pooled" and cfg.dedupe_exact
    assert cfg.paths.output == Path("/tmp/x")
    assert cfg.paths.corpus == fixture_dir / "corpus.jsonl"


def test_config_hash_changes_iff_config_changes(tmp_path):
    base = {"seed": 0, "paths": {"corpus": "c.jsonl", "lexicon": "l.tsv"}}
    h0 = config_from_dict(base, tmp_path).config_hash()
    assert config_from_dict(json.loads(json.dumps(base)), tmp_path).config_hash() == h0
    variants = [
        {"seed": 1},
        {"ttest": "pooled"},
        {"time_zone": "Europe/Paris"},
        {"dedupe_exact": True},
        {"grouping_window_days": 3},
        {"detector": {"hazard": 0.02}},
        {"detector": {"bocpd_prior": {"mu0": 0.1, "kappa0": 1, "alpha0": 1, "beta0": 0.01}}},
        {"topic": {"n_topics": 20}},
        {"ddr": {"threshold": 0.4}},
        {"paths": {"corpus": "other.jsonl", "lexicon": "l.tsv"}},
    ]
    hashes = {h0}
    for change in variants:
        h = config_from_dict({**base, **change}, tmp_path).config_hash()
        assert h not in hashes, change
        hashes.add(h)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"labeler": "ddr", "paths": {"lexicon": "l.tsv"}}, tmp_path)
    with pytest.raises(ConfigError):
        config_from_dict({"time_zone": "Nowhere/City", "paths": {"lexicon": "l.tsv"}}, tmp_path)
    with pytest.raises(ConfigError):
        config_from_dict({"detector": {"window": 3}, "paths": {"lexicon": "l.tsv"}}, tmp_path)


def test_demo_command(tmp_path, capsys):
    assert main(["demo", str(tmp_path / "demo"), "--seed", "2"]) == 0
    assert (tmp_path / "demo" / "config.yaml").is_file()
    assert "2021-04-10" in capsys.readouterr().out


def _toy_series():
    rng = np.random.default_rng(0)
    start = date(2021, 1, 1)
    out = {}
    for cat in CATEGORIES:
        vals = rng.random(10) / 3
        missing = np.zeros(10, bool)
        missing[4] = True
        vals[4] = np.nan
        out[cat] = DailyAffectSeries(cat, start, vals, np.where(missing, 0, 7), missing)
    return out


def test_plot_export_counts_and_roundtrip(tmp_path):
    series = _toy_series()
    cps = [ChangePoint("anger", date(2021, 1, 3), CUSUM, 0.75, "increase")]
    files = export_plot_data(series, cps, tmp_path)
    assert len(files) == 22 and files[-1].name == MARKERS_FILE
    for cat in CATEGORIES:
        days, vals = read_plot_csv(tmp_path / f"{cat}.csv")
        assert days == series[cat].dates
        assert_array_equal(vals, series[cat].values)
    assert (tmp_path / MARKERS_FILE).read_text().splitlines()[1] == "anger,2021-01-03,CUSUM,0.750000,increase"


def test_plot_export_empty_markers(tmp_path):
    export_plot_data(_toy_series(), [], tmp_path)
    assert (tmp_path / MARKERS_FILE).read_text() == "category,date,method,confidence,direction\n"
