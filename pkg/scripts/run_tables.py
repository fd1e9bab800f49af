"""Regenerate the convergence tables for both examples.

    python scripts/run_tables.py --out results/tables [--quick]

Writes one text table and one CSV per (problem, k, mu) and prints the tables.
"""
import argparse
import sys
from pathlib import Path

from wgcurve.cli import StudyConfig, run_study

# (problem, k, mu list, levels); finest meshes stay below 2e5 raw DOFs
STUDIES = [
    ("example1", 1, (1e-4, 1.0, 1e4), (0, 4)),
    ("example1", 2, (1e-4, 1.0, 1e4), (0, 4)),
    ("example1", 3, (1.0,), (0, 2)),
    ("example2", 1, (1e-2, 1.0, 1e2), (0, 2)),
    ("example2", 2, (1e-2, 1.0, 1e2), (0, 2)),
    ("example2", 3, (1.0,), (0, 1)),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/tables")
    ap.add_argument("--quick", action="store_true", help="two coarsest levels only")
    args = ap.parse_args(argv)
    status = 0
    for problem, k, mus, (lo, hi) in STUDIES:
        if args.quick:
            hi = lo + 1
        cfg = StudyConfig(problem=problem, k=k, variant="super", mu=mus, levels=(lo, hi), solver="lu",
                          out=str(Path(args.out)), emit=("table", "csv")).validate()
        status = max(status, run_study(cfg))
    return status


if __name__ == "__main__":
    sys.exit(main())
