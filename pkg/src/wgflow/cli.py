"""Command line: single runs, convergence studies, the experiment suite.

Config files are line oriented ``key = value`` with ``#`` comments; keys may be
dotted (``newton.max_iter``).  ``--set key=value`` and the shortcut flags
override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .benchmarks import EPS, PROBLEMS, build_problem
from .diagnostics import Expectations, audit
from .runner import convergence_study, final_errors, n_steps, scheme_config, simulate
from .schemes import Scheme
from .solver import NewtonConfig
from .suite import EXPERIMENTS, newton_check, run_experiment

log = logging.getLogger("wgflow")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TRACE_HEADER = ("step", "time", "mass", "energy_original", "energy_modified",
                "min_rho", "newton_iters", "r", "r_drift")
FLOAT_FMT = "%.16e"


class ConfigError(ValueError):
    pass


# -- value parsers ------------------------------------------------------------


def _positive(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _count(lo: int) -> Callable[[str], int]:
    def parse(s: str) -> int:
        v = int(s)
        if v < lo:
            raise ValueError(f"must be an integer >= {lo}")
        return v
    return parse


def _choice(options) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _optional(parse) -> Callable[[str], Any]:
    return lambda s: None if s.lower() == "none" else parse(s)


def _list(parse) -> Callable[[str], tuple]:
    def p(s: str) -> tuple:
        items = [t for t in s.replace(",", " ").split()]
        if not items:
            raise ValueError("empty list")
        return tuple(parse(t) for t in items)
    return p


def _exponent(s: str) -> float:
    v = float(s)
    if not v > 1:
        raise ValueError("m must exceed 1")
    return v


def _fraction(s: str) -> float:
    v = float(s)
    if not 0 < v < 1:
        raise ValueError("must lie in (0, 1)")
    return v


# keys forwarded to build_problem
PROBLEM_KEYS = {
    "cells": _count(2),
    "extent": _positive,
    "origin": float,
    "bc": _choice(("neumann", "periodic")),
    "dt": _positive,
    "T": _positive,
    "C": _optional(float),
    "m": _exponent,
    "seed": _count(0),
    "low": _positive,
    "high": _positive,
    "alpha": _positive,
    "potential": _choice(("quadratic", "sinusoidal")),
}

KEYS: dict[str, Callable[[str], Any]] = {
    "problem": _choice([p for p in PROBLEMS if p != "custom"]),
    "scheme": _choice([s.value for s in Scheme]),
    "epsilon": _positive,
    **PROBLEM_KEYS,
    "newton.tol_residual": _optional(_positive),
    "newton.tol_step": _positive,
    "newton.max_iter": _count(1),
    "newton.theta_boundary": _fraction,
    "newton.backtrack_factor": _fraction,
    "newton.max_backtracks": _count(1),
    "output.dir": str,
    "output.snapshot_times": _list(float),
    "output.trace_every": _count(1),
    "study.dt_list": _list(_positive),
    "study.reference_dt": _optional(_positive),
    "audit.mass_tol": _optional(_positive),
    "audit.min_rho": _optional(_positive),
    "audit.energy_rtol": _optional(_positive),
    "audit.max_newton": _optional(_count(1)),
    "audit.window_mean_max": _optional(_positive),
    "audit.window": _count(1),
}


@dataclass
class RunConfig:
    problem: str = "heat"
    scheme: str | None = None
    epsilon: float = EPS
    overrides: dict = field(default_factory=dict)
    newton: dict = field(default_factory=dict)
    out: str = "run"
    snapshot_times: tuple | None = None
    trace_every: int = 1
    dt_list: tuple = (0.1, 0.05, 0.025, 0.0125)
    reference_dt: float | None = None
    audit: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: dict) -> "RunConfig":
        cfg = cls()
        for key, v in values.items():
            head, _, tail = key.partition(".")
            if key in PROBLEM_KEYS:
                cfg.overrides[key] = v
            elif head == "newton":
                cfg.newton[tail] = v
            elif head == "audit":
                cfg.audit[tail] = v
            elif key == "output.dir":
                cfg.out = v
            elif key == "output.snapshot_times":
                cfg.snapshot_times = v
            elif key == "output.trace_every":
                cfg.trace_every = v
            elif key == "study.dt_list":
                cfg.dt_list = v
            elif key == "study.reference_dt":
                cfg.reference_dt = v
            else:
                setattr(cfg, key, v)
        return cfg

    def resolve(self):
        """The :class:`ProblemSpec` and :class:`SchemeConfig` this config describes."""
        try:
            problem = build_problem(self.problem, **self.overrides)
            newton = NewtonConfig(floor=self.epsilon, **self.newton)
            cfg = scheme_config(problem, self.scheme, newton=newton, epsilon_floor=self.epsilon)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return problem, cfg

    def expectations(self, problem, cfg) -> Expectations:
        """Audit thresholds: defaults by scheme kind, then ``audit.*`` overrides."""
        kind = cfg.kind
        conserving = kind is not Scheme.ONSAGER
        ex = Expectations(
            mass_tol=1e-10 * problem.grid.volume if conserving else None,
            min_rho=self.epsilon,
            # second-order schemes carry no dissipation guarantee
            energy_rtol=None if kind.is_bdf2 else 1e-8,
            max_newton=cfg.newton.max_iter,
            window_mean_max=10.0,
        )
        for k, v in self.audit.items():
            setattr(ex, k, v)
        return ex


def parse_lines(text: str, source: str = "<config>") -> dict:
    values = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        values[key] = _convert(key, value, f"{source}:{n}: ")
    return values


def _convert(key: str, value: str, where: str = ""):
    if key not in KEYS:
        raise ConfigError(f"{where}unknown key {key!r}")
    if value == "":
        raise ConfigError(f"{where}{key}: missing value")
    try:
        return KEYS[key](value)
    except ValueError as exc:
        raise ConfigError(f"{where}{key} = {value!r}: {exc}") from None


def parse_config(path: str | Path | None = None, sets=(), flags: dict | None = None) -> RunConfig:
    """File values, then ``--set`` pairs, then shortcut flags (later wins)."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {str(p)!r} not found")
        values.update(parse_lines(p.read_text(), str(p)))
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, value = (t.strip() for t in item.split("=", 1))
        values[key] = _convert(key, value, "--set ")
    for key, value in (flags or {}).items():
        if value is not None:
            values[key] = _convert(key, str(value), f"--{key} ")
    return RunConfig.from_values(values)


# -- output writers -----------------------------------------------------------


def _cell(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % v


def write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in trace.records:
            w.writerow([_cell(v) for v in (r.step, r.time, r.mass, r.energy_original,
                                           r.energy_modified, r.min_rho, r.newton_iterations,
                                           r.r, r.r_drift)])


def write_field(path: Path, grid, rho) -> None:
    coords = grid.coords()
    names = ("x", "y")[: grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "rho"])
        for row in zip(*coords, rho):
            w.writerow([FLOAT_FMT % v for v in row])


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "problem", "scheme", "dt", "T", "grid", "steps_requested",
                 "steps_completed", "status", "failure", "C", "audit", "final_errors"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "string"},
        "problem": {"type": "string"},
        "scheme": {"enum": [s.value for s in Scheme]},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "grid": {
            "type": "object",
            "required": ["dim", "cells", "spacing", "origin", "bc"],
            "properties": {
                "dim": {"enum": [1, 2]},
                "cells": {"type": "integer", "minimum": 2},
                "spacing": {"type": "number"},
                "origin": {"type": "array", "items": {"type": "number"}},
                "bc": {"enum": ["neumann", "periodic"]},
            },
        },
        "steps_requested": {"type": "integer", "minimum": 0},
        "steps_completed": {"type": "integer", "minimum": 0},
        "status": {"enum": ["ok", "step_failure"]},
        "failure": {"type": ["string", "null"]},
        "C": {"type": ["number", "null"]},
        "audit": {
            "type": "object",
            "required": ["ok", "violations", "max_mass_drift", "total_mass_change", "min_rho",
                         "monitored", "max_energy_increase", "max_newton", "window_means"],
            "properties": {
                "ok": {"type": "boolean"},
                "violations": {"type": "array", "items": {"type": "string"}},
                "monitored": {"enum": ["energy_modified", "energy_original"]},
            },
        },
        "final_errors": {
            "oneOf": [
                {"type": "null"},
                {"type": "object", "required": ["e_inf", "e_2"],
                 "properties": {"e_inf": {"type": "number"}, "e_2": {"type": "number"}}},
            ]
        },
    },
}


def _snapshot_steps(cfg_run: RunConfig, dt: float, T: float) -> list[int]:
    steps = n_steps(T, dt)
    if cfg_run.snapshot_times is None:
        return [steps]
    return sorted({min(steps, int(round(t / dt))) for t in cfg_run.snapshot_times if t >= 0})


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_run(rc: RunConfig, strict: bool) -> int:
    problem, cfg = rc.resolve()
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    snaps = _snapshot_steps(rc, cfg.dt, problem.T)
    res = simulate(problem, cfg, snapshot_steps=snaps, trace_every=rc.trace_every)
    write_trace(out / "trace.csv", res.trace)
    for step, rho in sorted(res.snapshots.items()):
        write_field(out / f"field_{step}.csv", problem.grid, rho)
    a = audit(res.trace, rc.expectations(problem, cfg))
    g = problem.grid
    report = {
        "version": __version__,
        "problem": problem.name,
        "scheme": cfg.kind.value,
        "dt": cfg.dt,
        "T": problem.T,
        "grid": {"dim": g.dim, "cells": g.cells, "spacing": g.spacing,
                 "origin": list(g.origin), "bc": g.bc},
        "steps_requested": n_steps(problem.T, cfg.dt),
        "steps_completed": res.state.step_index,
        "status": "ok" if res.ok else "step_failure",
        "failure": res.failure,
        "C": res.state.C,
        "audit": a.to_dict(),
        "final_errors": final_errors(problem, res),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    print(f"{problem.name}/{cfg.kind.value}: {report['status']}, "
          f"{report['steps_completed']}/{report['steps_requested']} steps -> {out}")
    if report["final_errors"]:
        print("final e_inf = %.4e, e_2 = %.4e" % (report["final_errors"]["e_inf"],
                                                  report["final_errors"]["e_2"]))
    for v in a.violations:
        print(f"audit: {v}")
    if not res.ok:
        return EXIT_FAIL
    if strict and not a.ok:
        return EXIT_FAIL
    return EXIT_OK


STUDY_HEADER = ("dt", "e_inf", "order_inf", "e_2", "order_2")


def cmd_study(rc: RunConfig) -> int:
    problem, cfg = rc.resolve()
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        study = convergence_study(problem, cfg.kind, rc.dt_list, newton=cfg.newton,
                                  reference_dt=rc.reference_dt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except RuntimeError as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    with open(out / "study.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STUDY_HEADER)
        for r in study.rows:
            w.writerow([_cell(v) for v in (r.dt, r.e_inf, r.order_inf, r.e_2, r.order_2)])
    doc = {
        "problem": problem.name,
        "scheme": cfg.kind.value,
        "target": study.target,
        "rows": [dict(zip(STUDY_HEADER, (r.dt, r.e_inf, r.order_inf, r.e_2, r.order_2)))
                 for r in study.rows],
    }
    (out / "study.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{'dt':>10} {'e_inf':>12} {'order':>7} {'e_2':>12} {'order':>7}")
    for r in study.rows:
        oi = "" if r.order_inf is None else f"{r.order_inf:.4f}"
        o2 = "" if r.order_2 is None else f"{r.order_2:.4f}"
        print(f"{r.dt:>10g} {r.e_inf:>12.4e} {oi:>7} {r.e_2:>12.4e} {o2:>7}")
    return EXIT_OK


def cmd_suite(names, out: str | None) -> int:
    failed = 0
    summary = {}
    for name in names:
        o = run_experiment(name, out)
        nc = newton_check(o.newton) if o.newton else None
        ok = o.passed and (nc is None or nc.passed)
        failed += not ok
        summary[name] = ok
        print(f"{'PASS' if ok else 'FAIL'} {name} ({o.seconds:.1f} s)")
        for c in o.checks + ([nc] if nc else []):
            print(f"  [{'ok' if c.passed else 'x '}] {c.name}: {c.detail}")
    if out is not None:
        (Path(out) / "suite.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_check(rc: RunConfig) -> int:
    problem, cfg = rc.resolve()
    g = problem.grid
    print(f"problem   {problem.name}")
    print(f"scheme    {cfg.kind.value}")
    print(f"grid      {g.dim}D, {g.cells} cells/axis, dx = {g.spacing:g}, bc = {g.bc}")
    print(f"dt, T     {cfg.dt:g}, {problem.T:g} ({n_steps(problem.T, cfg.dt)} steps)")
    print(f"epsilon   {cfg.epsilon_floor:g}")
    print(f"newton    {cfg.newton}")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one key (repeatable)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--problem")
        p.add_argument("--scheme")
        p.add_argument("--dt")
        p.add_argument("--T")
        p.add_argument("--cells")

    p = sub.add_parser("run", help="one simulation with trace, snapshots and report")
    common(p, None)
    p.add_argument("--strict", action="store_true", help="nonzero exit on audit violations")
    p = sub.add_parser("study", help="temporal convergence study")
    common(p, None)
    p = sub.add_parser("check-config", help="validate and print a resolved config")
    common(p, None)
    p = sub.add_parser("suite", help="named experiments with pass/fail checks")
    p.add_argument("names", nargs="+", metavar="NAME",
                   help="experiment names, or 'all': " + ", ".join(EXPERIMENTS))
    p.add_argument("--out", default=None, help="directory for per-experiment JSON")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "suite":
        names = list(EXPERIMENTS) if args.names == ["all"] else args.names
        unknown = [n for n in names if n not in EXPERIMENTS]
        if unknown:
            ap.error(f"unknown experiment(s): {', '.join(unknown)}")
        return cmd_suite(names, args.out)

    flags = {k: getattr(args, k) for k in ("problem", "scheme", "dt", "T", "cells")}
    if args.out is not None:
        flags["output.dir"] = args.out
    try:
        rc = parse_config(args.config, args.set, flags)
        if args.command == "check-config":
            return cmd_check(rc)
        if args.command == "study":
            return cmd_study(rc)
        return cmd_run(rc, args.strict)
    except ConfigError as exc:
        print(f"wgflow: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
