"""Time loops over a benchmark problem, and temporal convergence studies."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .benchmarks import ProblemSpec
from .diagnostics import RunTrace, TraceRecord, error_inf, error_l2, observed_order
from .schemes import (
    Scheme,
    SchemeConfig,
    StepFailure,
    TimeState,
    advance,
    init_state,
    make_report,
)
from .solver import NewtonConfig

log = logging.getLogger(__name__)


def n_steps(T: float, dt: float) -> int:
    # guard against T/dt landing just below an integer
    return int(math.floor(T / dt + 1e-9))


def scheme_config(problem: ProblemSpec, kind=None, dt=None, newton=None,
                  epsilon_floor: float = 1e-6) -> SchemeConfig:
    kind = Scheme(kind or problem.scheme)
    return SchemeConfig(
        kind=kind,
        dt=problem.dt if dt is None else dt,
        model=problem.model,
        splitting=problem.splitting() if kind.is_sav else None,
        mobilities=problem.mobilities,
        epsilon_floor=epsilon_floor,
        newton=newton or NewtonConfig(floor=epsilon_floor),
    )


@dataclass
class RunResult:
    state: TimeState
    trace: RunTrace
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def _record(state, report) -> TraceRecord:
    return TraceRecord(
        step=state.step_index,
        time=state.time,
        mass=report.mass,
        energy_original=report.energy_original,
        energy_modified=report.energy_modified,
        min_rho=report.min_rho,
        newton_iterations=report.newton_iterations,
        r=report.r,
        r_drift=report.r_drift,
    )


def simulate(problem: ProblemSpec, cfg: SchemeConfig, T: float | None = None,
             snapshot_steps=(), trace_every: int = 1, callback=None) -> RunResult:
    """Advance ``problem.initial`` to ``T`` (default ``problem.T``).

    A failed step ends the run early; the result keeps everything computed
    so far and names the failure.
    """
    grid = problem.grid
    T = problem.T if T is None else T
    steps = n_steps(T, cfg.dt)
    snapshot_steps = set(snapshot_steps)
    state = init_state(problem.initial, cfg, grid)
    trace = RunTrace()
    trace.append(_record(state, make_report(state, cfg, grid)))
    result = RunResult(state=state, trace=trace)
    if 0 in snapshot_steps:
        result.snapshots[0] = state.rho.copy()

    for n in range(1, steps + 1):
        try:
            state, report = advance(state, cfg, grid)
        except StepFailure as exc:
            log.warning("%s", exc)
            result.failure = str(exc)
            break
        # keep times exact multiples of dt
        state = _retime(state, n * cfg.dt)
        if n % trace_every == 0 or n == steps:
            trace.append(_record(state, report))
        if n in snapshot_steps:
            result.snapshots[n] = state.rho.copy()
        if callback is not None:
            callback(state, report)
        result.state = state
    return result


def _retime(state: TimeState, t: float) -> TimeState:
    return TimeState(rho=state.rho, rho_prev=state.rho_prev, r=state.r, r_prev=state.r_prev,
                     time=t, step_index=state.step_index, C=state.C)


def final_errors(problem: ProblemSpec, result: RunResult) -> dict | None:
    """Errors of the final field against the exact solution or reference, if any."""
    if problem.exact is not None:
        target = problem.exact(result.state.time)
    elif problem.reference is not None:
        target = problem.reference
    else:
        return None
    g = problem.grid
    return {
        "e_inf": error_inf(g, result.state.rho, target),
        "e_2": error_l2(g, result.state.rho, target),
    }


@dataclass
class StudyRow:
    dt: float
    e_inf: float
    e_2: float
    order_inf: float | None
    order_2: float | None


@dataclass
class StudyResult:
    rows: list[StudyRow]
    traces: list[RunTrace]
    target: str


def convergence_study(problem: ProblemSpec, kind, dt_list, newton=None,
                      reference_dt: float | None = None) -> StudyResult:
    """Run every ``dt`` at fixed grid to ``problem.T`` and tabulate errors and orders.

    Errors are taken against ``problem.exact`` unless ``reference_dt`` is set,
    in which case the target is the same scheme run at ``reference_dt`` on
    the same grid (isolates the temporal error when the spatial error of the
    grid would swamp it).
    """
    dt_list = [float(dt) for dt in dt_list]
    if not dt_list:
        raise ValueError("empty dt list")
    if reference_dt is None:
        if problem.exact is None:
            raise ValueError(f"{problem.name} has no exact solution; pass reference_dt")
        target_name = "exact"
    else:
        target_name = f"reference dt={reference_dt:g}"

    def run(dt):
        cfg = scheme_config(problem, kind, dt=dt, newton=newton)
        res = simulate(problem, cfg)
        if not res.ok:
            raise RuntimeError(f"study run dt={dt} failed: {res.failure}")
        return res

    if reference_dt is not None:
        target = run(reference_dt).state.rho
    g = problem.grid
    errs, traces = [], []
    for dt in dt_list:
        res = run(dt)
        traces.append(res.trace)
        tgt = problem.exact(res.state.time) if reference_dt is None else target
        errs.append((error_inf(g, res.state.rho, tgt), error_l2(g, res.state.rho, tgt)))
    o_inf = observed_order([(dt, e[0]) for dt, e in zip(dt_list, errs)])
    o_2 = observed_order([(dt, e[1]) for dt, e in zip(dt_list, errs)])
    rows = [
        StudyRow(dt, e[0], e[1], o_inf[i - 1] if i else None, o_2[i - 1] if i else None)
        for i, (dt, e) in enumerate(zip(dt_list, errs))
    ]
    return StudyResult(rows, traces, target_name)
