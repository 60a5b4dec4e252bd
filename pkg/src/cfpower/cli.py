"""Command line entry point: ``cfpower {solve,sweep,thresholds,reproduce}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import config, experiments
from .errors import ConfigError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("cfpower")


def _load(args) -> config.ExperimentConfig:
    cfg = config.load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "pbar", None) is not None:
        changes["pbar_grid"] = (args.pbar,)
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return config.validate(dataclasses.replace(cfg, **changes)) if changes else cfg


def _run(args) -> int:
    cfg = _load(args)
    out = args.out or cfg.output
    rows = experiments.run_sweep(cfg, out=out, dump_dir=args.dump_policies)
    if out is None:
        experiments.write_csv(rows, sys.stdout)
    failed = [r for r in rows if r.error]
    for r in failed:
        log.error("pbar=%g %s: %s", r.pbar, r.algorithm_id, r.error)
    log.info("%d rows%s", len(rows), f" written to {out}" if out else "")
    return EXIT_SOLVER if failed else EXIT_OK


def _thresholds(args) -> int:
    cfg = config.load_config(args.config) if args.config else None
    for name, value in experiments.report_thresholds(cfg):
        print(f"{name}\t{value:.6f}")
    return EXIT_OK


def _reproduce(args) -> int:
    rows, checks = experiments.reproduce(args.preset, workers=args.workers or 1)
    if args.out:
        experiments.write_csv(rows, args.out)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfpower", description=__doc__)
    parser.add_argument("--quiet", action="store_true", help="only errors on stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, pbar=False):
        p.add_argument("--config", required=True, help="YAML file or preset name")
        if pbar:
            p.add_argument("--pbar", type=float, required=True, help="single power budget")
        p.add_argument("--out", help="CSV output path (default: config output, else stdout)")
        p.add_argument("--dump-policies", metavar="DIR", help="write one JSON policy per row")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="process pool size")
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    common(sub.add_parser("solve", help="run the algorithms at one budget"), pbar=True)
    common(sub.add_parser("sweep", help="run the algorithms over the budget grid"))
    p = sub.add_parser("thresholds", help="print the good-set threshold budget")
    p.add_argument("--config", help="YAML file or preset name (default: all discrete presets)")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    p = sub.add_parser("reproduce", help="run a preset and check it against golden values")
    p.add_argument("preset", choices=sorted(config.PRESETS))
    p.add_argument("--out", help="also write the sweep CSV here")
    p.add_argument("--workers", type=int)
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    handler = {"solve": _run, "sweep": _run, "thresholds": _thresholds, "reproduce": _reproduce}[args.verb]
    try:
        return handler(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
