"""Temporal convergence of S1 and S2 on the smooth 1D heat problem.

    python scripts/heat_tables.py [--cells 2000] [--out results/heat]
"""

import argparse
import csv
from pathlib import Path

from wgflow.benchmarks import build_problem
from wgflow.runner import convergence_study
from wgflow.suite import HEAT_DTS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=2000)
    ap.add_argument("--schemes", nargs="+", default=["s1", "s2"])
    ap.add_argument("--out", default="results/heat")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for kind in args.schemes:
        study = convergence_study(build_problem("heat", cells=args.cells), kind, HEAT_DTS)
        print(f"\n{kind}, dx = 1/{args.cells}")
        print(f"{'dt':>8} {'e_inf':>11} {'order':>7} {'e_2':>11} {'order':>7}")
        with open(out / f"{kind}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dt", "e_inf", "order_inf", "e_2", "order_2"])
            for r in study.rows:
                w.writerow([r.dt, r.e_inf, r.order_inf, r.e_2, r.order_2])
                oi = "" if r.order_inf is None else f"{r.order_inf:.4f}"
                o2 = "" if r.order_2 is None else f"{r.order_2:.4f}"
                print(f"{r.dt:>8g} {r.e_inf:>11.4e} {oi:>7} {r.e_2:>11.4e} {o2:>7}")


if __name__ == "__main__":
    main()
