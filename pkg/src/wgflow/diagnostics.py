"""Error norms, observed orders and audits of run traces."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import Grid


def _exact_values(grid: Grid, exact):
    if callable(exact):
        return grid.sample(exact)
    return grid.check(exact, "exact")


def error_inf(grid: Grid, numeric, exact) -> float:
    """``max_i |numeric_i - exact(x_i)|``; ``exact`` is an array or ``f(*coords)``."""
    return float(np.max(np.abs(grid.check(numeric) - _exact_values(grid, exact))))


def error_l2(grid: Grid, numeric, exact) -> float:
    """``(dx^dim * sum (numeric - exact)^2)^(1/2)`` over all cells."""
    diff = grid.check(numeric) - _exact_values(grid, exact)
    return float(np.sqrt(grid.cell_volume * np.sum(diff**2)))


def observed_order(errors) -> list[float]:
    """Orders ``log(e_k / e_k+1) / log(dt_k / dt_k+1)`` from ``[(dt, e), ...]``."""
    pairs = [(float(dt), float(e)) for dt, e in errors]
    if any(e <= 0 for _, e in pairs):
        raise ValueError("errors must be positive")
    return [
        float(np.log(e0 / e1) / np.log(d0 / d1))
        for (d0, e0), (d1, e1) in zip(pairs, pairs[1:])
    ]


@dataclass
class TraceRecord:
    step: int
    time: float
    mass: float
    energy_original: float
    energy_modified: float | None
    min_rho: float
    newton_iterations: int
    r: float | None = None
    r_drift: float | None = None


@dataclass
class RunTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.step <= self.records[-1].step:
            raise ValueError("trace steps must increase")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array(
            [np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records],
            dtype=float,
        )

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class Expectations:
    """Pass/fail thresholds for :func:`audit`; ``None`` disables a check.

    ``mass_tol`` is per-step absolute drift, ``energy_rtol`` is relative to the
    magnitude of the first monitored energy.
    """

    mass_tol: float | None = None
    min_rho: float | None = None
    energy_rtol: float | None = 1e-8
    max_newton: int | None = 50
    window_mean_max: float | None = None
    window: int = 50


@dataclass
class AuditReport:
    steps: int
    max_mass_drift: float
    total_mass_change: float
    min_rho: float
    monitored: str
    max_energy_increase: float
    max_energy_increase_rel: float
    max_newton: int
    mean_newton: float
    window_means: list[float]
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def window_means(iterations, window: int = 50) -> list[float]:
    """Mean Newton iterations over consecutive full windows of ``window`` steps."""
    it = np.asarray(iterations, dtype=float)
    n = len(it) // window
    return [float(it[i * window:(i + 1) * window].mean()) for i in range(n)]


def audit(trace: RunTrace, expectations: Expectations | None = None) -> AuditReport:
    """Mass drift, positivity, energy monotonicity and Newton effort of a run.

    The monitored energy is ``energy_modified`` when the trace carries it and
    ``energy_original`` otherwise.  Records are assumed consecutive steps;
    the first record is the initial state (its Newton count is ignored).
    """
    if not trace.records:
        raise ValueError("empty trace")
    ex = expectations or Expectations()
    mass = trace.column("mass")
    dm = np.abs(np.diff(mass))
    mod = trace.column("energy_modified")
    if np.all(np.isfinite(mod)):
        energy, monitored = mod, "energy_modified"
    else:
        energy, monitored = trace.column("energy_original"), "energy_original"
    jumps = np.diff(energy)
    max_jump = float(max(0.0, jumps.max())) if len(jumps) else 0.0
    scale = abs(energy[0]) if energy[0] != 0 else 1.0
    newton = trace.column("newton_iterations")[1:]
    windows = window_means(newton, ex.window)
    min_rho = float(np.min(trace.column("min_rho")))

    v = []
    if ex.mass_tol is not None and len(dm) and dm.max() > ex.mass_tol:
        v.append(f"mass drift {dm.max():.3e} > {ex.mass_tol:.3e}")
    if ex.min_rho is not None and min_rho < ex.min_rho:
        v.append(f"min rho {min_rho:.3e} < {ex.min_rho:.3e}")
    if ex.energy_rtol is not None and max_jump > ex.energy_rtol * scale:
        v.append(f"{monitored} increased by {max_jump:.3e} > {ex.energy_rtol:.1e}*|E0|")
    max_newton = int(newton.max()) if len(newton) else 0
    if ex.max_newton is not None and max_newton > ex.max_newton:
        v.append(f"{max_newton} Newton iterations > {ex.max_newton}")
    if ex.window_mean_max is not None and len(windows) > 1:
        worst = max(windows[1:])
        if worst > ex.window_mean_max:
            v.append(f"windowed Newton mean {worst:.2f} > {ex.window_mean_max}")

    return AuditReport(
        steps=len(trace) - 1,
        max_mass_drift=float(dm.max()) if len(dm) else 0.0,
        total_mass_change=float(mass[-1] - mass[0]),
        min_rho=min_rho,
        monitored=monitored,
        max_energy_increase=max_jump,
        max_energy_increase_rel=max_jump / scale,
        max_newton=max_newton,
        mean_newton=float(newton.mean()) if len(newton) else 0.0,
        window_means=windows,
        violations=v,
    )
