"""Positivity-preserving time steppers for Wasserstein gradient flows.

Every scheme is posed as one nonlinear system in the new density and solved
by damped Newton.  Residuals are scaled to density units,

    R(rho) = rho - q - tau * [ div(a grad mu(rho)) + drift - V2 * mu(rho) ],

with ``q``/``tau`` the backward-Euler or BDF2 weights, ``a`` a face mobility
frozen for the step and ``mu`` the implicit chemical potential.  For S1,
``mu = log rho``; for the SAV schemes ``mu = xi(rho) phi + kappa log rho``
where ``xi`` is affine in ``rho`` (a rank-one coupling in the Jacobian).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .energy import (
    EnergyModel,
    Entropy,
    Splitting,
    dE1,
    entropy,
    eval_E1,
    eval_energy,
    resolve_C,
    second_derivative_H,
)
from .grid import Grid, divgrad_bands, face_average, integrate, weighted_divgrad
from .solver import NewtonConfig, SolveReport, SparseOperator, newton_solve


class Scheme(str, Enum):
    S1 = "s1"
    S1_BDF2 = "s1_bdf2"
    S2 = "s2"
    S2_BDF2 = "s2_bdf2"
    ONSAGER = "onsager"

    @property
    def is_sav(self) -> bool:
        return self in (Scheme.S2, Scheme.S2_BDF2, Scheme.ONSAGER)

    @property
    def is_bdf2(self) -> bool:
        return self in (Scheme.S1_BDF2, Scheme.S2_BDF2)


class ConfigError(ValueError):
    pass


class StepFailure(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SchemeConfig:
    kind: Scheme
    dt: float
    model: EnergyModel | None = None
    splitting: Splitting | None = None
    mobilities: tuple[Callable, Callable] | None = None
    epsilon_floor: float = 1e-6
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        self.kind = Scheme(self.kind)
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.kind.is_sav and self.splitting is None:
            raise ConfigError(f"{self.kind.value} needs an energy splitting")
        if self.kind in (Scheme.S1, Scheme.S1_BDF2) and self.model is None:
            raise ConfigError(f"{self.kind.value} needs an energy model")
        if self.kind is Scheme.ONSAGER and self.mobilities is None:
            raise ConfigError("onsager needs mobilities (V1, V2)")
        if self.newton.floor != self.epsilon_floor:
            self.newton = replace(self.newton, floor=self.epsilon_floor)


@dataclass(frozen=True, eq=False)
class TimeState:
    rho: np.ndarray
    rho_prev: np.ndarray | None = None
    r: float | None = None
    r_prev: float | None = None
    time: float = 0.0
    step_index: int = 0
    C: float | None = None


@dataclass
class StepReport:
    newton_iterations: int
    final_residual_norm: float
    mass: float
    energy_original: float
    energy_modified: float | None
    min_rho: float
    r: float | None = None
    r_drift: float | None = None
    solve: SolveReport | None = None


def extrapolate_positive(psi_n, psi_prev):
    """Branchwise extrapolation to the half step that stays positive.

    ``2 psi_n - psi_prev`` where ``psi_n >= psi_prev``, otherwise the harmonic
    form ``1 / (2 / psi_n - 1 / psi_prev)``.
    """
    a = np.asarray(psi_n, dtype=float)
    b = np.asarray(psi_prev, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("extrapolate_positive needs positive inputs")
    grow = a >= b
    with np.errstate(divide="ignore"):
        harmonic = 1.0 / (2.0 / a - 1.0 / np.where(grow, np.inf, b))
    out = np.where(grow, 2.0 * a - b, harmonic)
    return float(out) if out.ndim == 0 else out


def init_state(rho0, cfg: SchemeConfig, grid: Grid) -> TimeState:
    """Floor the initial data at epsilon and set ``r0 = sqrt(E1 + C)`` for SAV kinds."""
    rho = np.maximum(grid.check(rho0, "rho0"), cfg.epsilon_floor)
    if not cfg.kind.is_sav:
        return TimeState(rho=rho)
    C = resolve_C(cfg.splitting, rho, grid)
    e1c = eval_E1(cfg.splitting, rho, grid) + C
    if not e1c > 0:
        raise ConfigError(f"E1(rho0) + C = {e1c:.6g} must be positive; raise C")
    return TimeState(rho=rho, r=float(np.sqrt(e1c)), C=C)


# -- the shared per-step system ------------------------------------------------


class _StepSystem:
    """Residual and Jacobian of one implicit step (see module docstring)."""

    def __init__(self, grid, *, base, tau, mobility, kappa=1.0, phi=None,
                 xi_alpha=None, xi_q=None, S=None, drift=None, reaction=None):
        self.grid = grid
        self.base = base
        self.tau = tau
        self.mobility = mobility
        self.kappa = kappa
        self.phi = phi
        self.alpha, self.q, self.S = xi_alpha, xi_q, S
        self.drift = drift
        self.reaction = reaction
        self.bands = divgrad_bands(grid, mobility)
        if phi is not None:
            lphi = weighted_divgrad(grid, mobility, phi)
            if reaction is not None:
                lphi = lphi - reaction * phi
            self.u = -tau * lphi
            self.w = grid.cell_volume * phi / (2.0 * S * S)

    def xi(self, rho) -> float:
        dv = self.grid.cell_volume
        return (self.alpha + dv * np.dot(self.phi, rho - self.q) / (2.0 * self.S)) / self.S

    def mu(self, rho):
        mu = self.kappa * np.log(rho)
        if self.phi is not None:
            mu = mu + self.xi(rho) * self.phi
        return mu

    def residual(self, rho):
        mu = self.mu(rho)
        rhs = weighted_divgrad(self.grid, self.mobility, mu)
        if self.drift is not None:
            rhs = rhs + self.drift
        if self.reaction is not None:
            rhs = rhs - self.reaction * mu
        return rho - self.base - self.tau * rhs

    def jacobian(self, rho) -> SparseOperator:
        g = self.kappa / rho
        bands = {k: -self.tau * d * g for k, d in self.bands.items()}
        bands[0] = bands[0] + 1.0
        if self.reaction is not None:
            bands[0] = bands[0] + self.tau * self.reaction * g
        if self.phi is None:
            return SparseOperator(bands)
        return SparseOperator(bands, self.u, self.w)

    def solve(self, x0, newton: NewtonConfig):
        return newton_solve(self.residual, self.jacobian, x0, newton)


def _finish(cfg, grid, state, rho, solve, r=None):
    if not solve.converged:
        raise StepFailure(
            f"step {state.step_index + 1} ({cfg.kind.value}): {solve.message}", solve
        )
    new = TimeState(
        rho=rho,
        rho_prev=state.rho,
        r=r,
        r_prev=state.r,
        time=state.time + cfg.dt,
        step_index=state.step_index + 1,
        C=state.C,
    )
    return new, make_report(new, cfg, grid, solve)


def make_report(state: TimeState, cfg: SchemeConfig, grid: Grid, solve=None) -> StepReport:
    """Diagnostics of a state: mass, original/monitored energy, min density, r drift."""
    rho = state.rho
    r_drift = None
    if cfg.kind.is_sav:
        s = cfg.splitting
        e1 = eval_E1(s, rho, grid)
        ent = s.entropy_coeff * entropy(rho, grid)
        e_orig = e1 + ent
        e_mod = ent + state.r**2
        r_drift = state.r - float(np.sqrt(max(e1 + state.C, 0.0)))
    else:
        e_orig = eval_energy(cfg.model, rho, grid)
        e_mod = s1_lyapunov(cfg.model, rho, grid)
    return StepReport(
        newton_iterations=solve.iterations if solve else 0,
        final_residual_norm=solve.final_residual if solve else 0.0,
        mass=integrate(grid, rho),
        energy_original=e_orig,
        energy_modified=e_mod,
        min_rho=float(np.min(rho)),
        r=state.r,
        r_drift=r_drift,
        solve=solve,
    )


def s1_lyapunov(model: EnergyModel, rho, grid: Grid) -> float | None:
    """Functional the S1 step provably does not increase, if one is known.

    Pure-entropy H (any potential): the model energy itself.  No potential
    (any admissible H): the entropy ``int rho (log rho - 1)``.  Otherwise None.
    """
    h = model.h_terms
    if h and all(isinstance(t, Entropy) for t in h):
        return eval_energy(model, rho, grid)
    if model.potential is None:
        return entropy(rho, grid)
    return None


# -- system builders -------------------------------------------------------------


def _s1_phi(model, rho):
    return rho**2 * second_derivative_H(model, rho)


def _potential_drift(grid, model, rho_mob):
    v = model.potential
    if v is None:
        return None
    return weighted_divgrad(grid, face_average(grid, rho_mob), v)


def _build_s1(state, cfg, grid, model):
    rho_n = state.rho
    system = _StepSystem(
        grid,
        base=rho_n,
        tau=cfg.dt,
        mobility=face_average(grid, _s1_phi(model, rho_n)),
        drift=_potential_drift(grid, model, rho_n),
    )
    return system, rho_n


def _build_s1_bdf2(state, cfg, grid, model):
    if state.rho_prev is None:
        raise ConfigError("s1_bdf2 needs the previous density; start with step_s1")
    rho_n, rho_p = state.rho, state.rho_prev
    phi_star = extrapolate_positive(_s1_phi(model, rho_n), _s1_phi(model, rho_p))
    rho_star = extrapolate_positive(rho_n, rho_p)
    system = _StepSystem(
        grid,
        base=(4.0 * rho_n - rho_p) / 3.0,
        tau=2.0 * cfg.dt / 3.0,
        mobility=face_average(grid, phi_star),
        drift=_potential_drift(grid, model, rho_star),
    )
    return system, rho_star


def _sav_parts(splitting, rho_ref, state, grid):
    if state.r is None or state.C is None:
        raise ConfigError("SAV state missing r; build it with init_state")
    e1c = eval_E1(splitting, rho_ref, grid) + state.C
    if not e1c > 0:
        raise ConfigError(f"E1 + C = {e1c:.6g} is not positive")
    return dE1(splitting, rho_ref), float(np.sqrt(e1c))


def _build_s2(state, cfg, grid, splitting, mob_cells=None, reaction=None):
    rho_n = state.rho
    phi, S = _sav_parts(splitting, rho_n, state, grid)
    system = _StepSystem(
        grid,
        base=rho_n,
        tau=cfg.dt,
        mobility=face_average(grid, rho_n if mob_cells is None else mob_cells),
        kappa=splitting.entropy_coeff,
        phi=phi,
        xi_alpha=state.r,
        xi_q=rho_n,
        S=S,
        reaction=reaction,
    )
    return system, rho_n


def _build_s2_bdf2(state, cfg, grid, splitting):
    if state.rho_prev is None or state.r_prev is None:
        raise ConfigError("s2_bdf2 needs the previous step; start with step_s2")
    rho_n, rho_p = state.rho, state.rho_prev
    rho_star = extrapolate_positive(rho_n, rho_p)
    phi, S = _sav_parts(splitting, rho_star, state, grid)
    q = (4.0 * rho_n - rho_p) / 3.0
    system = _StepSystem(
        grid,
        base=q,
        tau=2.0 * cfg.dt / 3.0,
        mobility=face_average(grid, rho_star),
        kappa=splitting.entropy_coeff,
        phi=phi,
        xi_alpha=(4.0 * state.r - state.r_prev) / 3.0,
        xi_q=q,
        S=S,
    )
    return system, rho_star


def _onsager_mobilities(rho_n, V1, V2):
    v1 = np.asarray(V1(rho_n), dtype=float)
    v2 = np.broadcast_to(np.asarray(V2(rho_n), dtype=float), rho_n.shape)
    if np.any(~(v1 > 0)):
        raise ConfigError("V1 must be positive")
    if np.any(~(v2 >= 0)):
        raise ConfigError("V2 must be nonnegative")
    return v1, (v2 if np.any(v2) else None)


def _build_onsager(state, cfg, grid, splitting, V1, V2):
    v1, v2 = _onsager_mobilities(state.rho, V1, V2)
    return _build_s2(state, cfg, grid, splitting, mob_cells=v1, reaction=v2)


def _run(built, state, cfg, grid):
    system, x0 = built
    rho, solve = system.solve(x0, cfg.newton)
    r = system.xi(rho) * system.S if system.phi is not None and solve.converged else None
    return _finish(cfg, grid, state, rho, solve, r)


# -- public steppers -----------------------------------------------------------


def step_s1(state: TimeState, cfg: SchemeConfig, grid: Grid, model: EnergyModel | None = None):
    """First-order S1 step: mobility ``rho_n^2 H''(rho_n)`` on ``grad log rho``."""
    return _run(_build_s1(state, cfg, grid, model or cfg.model), state, cfg, grid)


def step_s1_bdf2(state: TimeState, cfg: SchemeConfig, grid: Grid, model: EnergyModel | None = None):
    """BDF2 S1 step with positivity-preserving extrapolated mobility and drift."""
    return _run(_build_s1_bdf2(state, cfg, grid, model or cfg.model), state, cfg, grid)


def step_s2(state: TimeState, cfg: SchemeConfig, grid: Grid, splitting: Splitting | None = None):
    """First-order SAV step; ``r`` follows the discrete energy update."""
    return _run(_build_s2(state, cfg, grid, splitting or cfg.splitting), state, cfg, grid)


def step_s2_bdf2(state: TimeState, cfg: SchemeConfig, grid: Grid, splitting: Splitting | None = None):
    """BDF2 SAV step with E1, dE1 and the mobility taken at the extrapolated density."""
    return _run(_build_s2_bdf2(state, cfg, grid, splitting or cfg.splitting), state, cfg, grid)


def step_onsager(state: TimeState, cfg: SchemeConfig, grid: Grid,
                 splitting: Splitting | None = None, V1=None, V2=None):
    """SAV step for ``rho_t = div(V1 grad mu) - V2 mu`` with mobilities frozen at rho_n.

    Mass is not conserved.  ``V1`` must be positive; ``V2`` nonnegative.
    """
    if V1 is None or V2 is None:
        V1, V2 = cfg.mobilities
    built = _build_onsager(state, cfg, grid, splitting or cfg.splitting, V1, V2)
    return _run(built, state, cfg, grid)


def _built(state, cfg, grid):
    kind = cfg.kind
    if kind is Scheme.S1 or (kind is Scheme.S1_BDF2 and state.rho_prev is None):
        return _build_s1(state, cfg, grid, cfg.model)
    if kind is Scheme.S1_BDF2:
        return _build_s1_bdf2(state, cfg, grid, cfg.model)
    if kind is Scheme.S2 or (kind is Scheme.S2_BDF2 and state.rho_prev is None):
        return _build_s2(state, cfg, grid, cfg.splitting)
    if kind is Scheme.S2_BDF2:
        return _build_s2_bdf2(state, cfg, grid, cfg.splitting)
    return _build_onsager(state, cfg, grid, cfg.splitting, *cfg.mobilities)


def step_system(state: TimeState, cfg: SchemeConfig, grid: Grid) -> _StepSystem:
    """The nonlinear system the next :func:`advance` call would solve."""
    return _built(state, cfg, grid)[0]


def advance(state: TimeState, cfg: SchemeConfig, grid: Grid):
    """One step of ``cfg.kind``; BDF2 kinds take a first-order step when no history exists."""
    return _run(_built(state, cfg, grid), state, cfg, grid)
