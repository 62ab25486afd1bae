"""PME (m=3) from the Barenblatt profile at t=0 to t=1 with S1 and S2.

Writes the final fields, the traces and the y=0 profile next to the closed
form, and prints the audit numbers.

    python scripts/barenblatt.py [--schemes s2] [--dt 1e-3]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from wgflow.benchmarks import EPS, build_problem
from wgflow.cli import write_field, write_trace
from wgflow.diagnostics import Expectations, audit, error_inf
from wgflow.runner import scheme_config, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--schemes", nargs="+", default=["s1", "s2"])
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--cells", type=int, default=80)
    ap.add_argument("--out", default="results/barenblatt")
    args = ap.parse_args()

    for kind in args.schemes:
        p = build_problem("pme_barenblatt", dt=args.dt, cells=args.cells)
        res = simulate(p, scheme_config(p, kind))
        out = Path(args.out) / kind
        out.mkdir(parents=True, exist_ok=True)
        write_trace(out / "trace.csv", res.trace)
        write_field(out / "final.csv", p.grid, res.state.rho)

        x, y = p.grid.coords()
        exact = p.exact(res.state.time)
        row = np.isclose(y, p.grid.axis_centers(1)[p.grid.cells // 2])
        with open(out / "profile.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "rho", "exact"])
            w.writerows(zip(x[row], res.state.rho[row], exact[row]))

        a = audit(res.trace, Expectations(mass_tol=1e-10 * p.grid.volume, min_rho=EPS))
        print(f"{kind}: {res.state.step_index} steps, failure={res.failure}")
        print(f"  e_inf vs closed form {error_inf(p.grid, res.state.rho, exact):.4e}")
        print(f"  max mass drift {a.max_mass_drift:.2e}, min rho {a.min_rho:.2e}, "
              f"{a.monitored} max rel increase {a.max_energy_increase_rel:.2e}")
        print(f"  Newton max {a.max_newton}, mean {a.mean_newton:.2f}")


if __name__ == "__main__":
    main()
