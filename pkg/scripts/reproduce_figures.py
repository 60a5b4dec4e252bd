"""Sweep every preset, write one CSV per preset and print the golden checks.

    python3 scripts/reproduce_figures.py [--out results] [--workers 4] [preset ...]
"""
import argparse
import os
import sys
import time

from cfpower.config import PRESETS, preset
from cfpower.experiments import golden_checks, run_sweep


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("presets", nargs="*", default=sorted(PRESETS))
    parser.add_argument("--out", default="results")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    failed = 0
    for name in args.presets:
        t0 = time.perf_counter()
        path = os.path.join(args.out, f"{name}.csv")
        rows = run_sweep(preset(name), out=path, workers=args.workers)
        print(f"{name}: {len(rows)} rows -> {path} ({time.perf_counter() - t0:.1f} s)")
        for check in golden_checks(name, rows):
            failed += not check.passed
            print(f"  {'PASS' if check.passed else 'FAIL'}  {check.name}  [{check.detail}]")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
