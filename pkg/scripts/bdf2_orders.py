"""Observed temporal order of the two BDF2 schemes on the heat problem.

S1-BDF2 is measured against the closed form on the fine default grid.
S2-BDF2 treats part of the energy explicitly and is only stable for
dt * kappa * k_max^2 <= 2, so it is measured on a coarse grid against a
small-dt run of itself (``--cells``/``--reference-dt``).

    python scripts/bdf2_orders.py
"""

import argparse

from wgflow.benchmarks import build_problem
from wgflow.runner import convergence_study
from wgflow.suite import BDF2_DTS, S2_BDF2_CELLS, S2_BDF2_REFERENCE_DT


def show(label, study):
    print(f"\n{label} (target: {study.target})")
    for r in study.rows:
        o = "" if r.order_inf is None else f"{r.order_inf:.3f}"
        print(f"  dt={r.dt:<7g} e_inf={r.e_inf:.4e} order={o}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=S2_BDF2_CELLS)
    ap.add_argument("--reference-dt", type=float, default=S2_BDF2_REFERENCE_DT)
    args = ap.parse_args()
    show("s1_bdf2", convergence_study(build_problem("heat"), "s1_bdf2", BDF2_DTS))
    show("s2_bdf2", convergence_study(build_problem("heat", cells=args.cells), "s2_bdf2",
                                      BDF2_DTS, reference_dt=args.reference_dt))


if __name__ == "__main__":
    main()
