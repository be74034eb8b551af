"""Command-line entry point: ``moodpulse <stage|run|demo> --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, StageError
from .pipeline import CONFIG_EXIT, EXIT_CODES, STAGES, run_pipeline, run_stage

log = logging.getLogger("moodpulse")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML pipeline config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--dedupe-exact", action="store_true", default=None,
                   help="drop same-day posts with identical raw text")
    p.add_argument("--ttest", choices=("welch", "pooled"), help="long-term test")
    p.add_argument("--n-topics", type=int, help="clusters per topic window")
    p.add_argument("--workers", type=int, default=1, help="threads for per-category work")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moodpulse", description="Detect and measure affect reactions in post streams.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        _common(sub.add_parser(name, help=f"run the {name} stage on the previous stages' files"))
    _common(sub.add_parser("run", help="run every stage into a fresh output directory"))
    demo = sub.add_parser("demo", help="write a synthetic corpus with one injected event")
    demo.add_argument("dir", help="directory for corpus, lexicon, verdicts and config")
    demo.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    if args.command == "demo":
        from .synthetic import write_event_fixture

        fx = write_event_fixture(args.dir, seed=args.seed)
        print(f"wrote {fx.config}; injected event on {fx.event_date}")
        return 0

    overrides = {"seed": args.seed, "output": args.out, "dedupe_exact": args.dedupe_exact,
                 "ttest": args.ttest, "n_topics": args.n_topics}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_EXIT

    if args.command == "run":
        code, message = run_pipeline(cfg, workers=args.workers)
        if code:
            print(message, file=sys.stderr)
        else:
            print(f"outputs in {cfg.paths.output}")
        return code

    out = Path(cfg.paths.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        stats = run_stage(args.command, cfg, out, args.workers)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CODES[exc.stage]
    print(f"{args.command}: " + ", ".join(f"{k}={v}" for k, v in stats.items() if not isinstance(v, list)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
