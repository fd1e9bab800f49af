"""Compare the single and literal interface Neumann conventions.

Runs the manufactured nonzero-jump problem with the standard variant and
prints final-pair rates for both conventions.

    python scripts/neumann_adjudication.py [--levels 4] [--mu 10]
"""
import argparse

from wgcurve.verify import convergence_study, manufactured_jump
from wgcurve.wg_operator import DiscretizationConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=4, help="finest level")
    ap.add_argument("--mu", type=float, default=10.0)
    args = ap.parse_args(argv)
    p = manufactured_jump(args.mu)
    print(f"{'k':>2} {'convention':>10} {'L2 err':>11} {'L2 rate':>8} {'energy':>11} {'rate':>6} {'edge rate':>9}")
    for k in (1, 2):
        for conv in ("single", "literal"):
            t = convergence_study(p, DiscretizationConfig(k, "standard"), range(args.levels + 1), neumann=conv)
            last = t.reports[-1]
            print(f"{k:>2} {conv:>10} {last.errL2a:11.4e} {t.final_rate('errL2a'):8.2f} "
                  f"{last.tripleBar:11.4e} {t.final_rate('tripleBar'):6.2f} {t.final_rate('edgeNorm'):9.2f}")


if __name__ == "__main__":
    main()
