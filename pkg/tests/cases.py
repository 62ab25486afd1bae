"""Random small-grid step cases, solved by the package and by ``oracle``."""

from __future__ import annotations

import math

import numpy as np

import oracle
from wgflow.benchmarks import fisher_kpp_mobilities
from wgflow.energy import EnergyModel, Entropy, Potential, PowerLaw, eval_E1, make_splitting
from wgflow.grid import build_grid
from wgflow.schemes import SchemeConfig, TimeState, advance, init_state, step_system
from wgflow.solver import NewtonConfig

SCHEMES = ("s1", "s1_bdf2", "s2", "s2_bdf2", "onsager")
TIGHT = NewtonConfig(tol_residual=1e-13, floor=1e-12)


def draw(rng: np.random.Generator, cells: int) -> dict:
    rho = rng.uniform(0.2, 3.0, cells)
    return dict(
        cells=cells,
        h=float(rng.uniform(0.2, 1.0)),
        dt=float(rng.uniform(1e-3, 0.05)),
        m=float(rng.uniform(1.5, 4.0)),
        v=rng.uniform(-1.0, 1.0, cells),
        kappa=float(rng.uniform(0.3, 2.0)),
        rho=rho,
        # close to rho so the BDF2 base (4 rho - rho_prev) / 3 stays positive
        rho_prev=rho * rng.uniform(0.75, 1.3, cells),
        r_scale=float(rng.uniform(0.9, 1.1)),
        alpha=float(rng.uniform(0.05, 1.0)),
    )


def _state(grid, splitting, p, bdf2):
    """SAV state with ``r`` near ``sqrt(E1 + C)``; returns it and the oracle's r values."""
    rho, prev = p["rho"], p["rho_prev"]
    C = max(1.0, 1.0 - eval_E1(splitting, rho, grid)) + 0.5
    if splitting.e1_terms and not bdf2:
        C = max(C, 1.0 - eval_E1(splitting, prev, grid) + 0.5)
    r_n = p["r_scale"] * math.sqrt(eval_E1(splitting, rho, grid) + C)
    r_p = math.sqrt(max(eval_E1(splitting, prev, grid) + C, 1e-3))
    state = TimeState(rho=rho.copy(), rho_prev=prev.copy() if bdf2 else None,
                      r=r_n, r_prev=r_p if bdf2 else None, C=C)
    return state, r_n, r_p, C


def run_case(kind: str, p: dict):
    """``(package rho, oracle rho, package r, oracle r)``; r entries are None for S1 kinds."""
    M, h = p["cells"], p["h"]
    grid = build_grid(1, M, M * h)
    rho, prev, v, m, dt = p["rho"], p["rho_prev"], p["v"], p["m"], p["dt"]
    lv, lr, lp = list(v), list(rho), list(prev)
    bdf2 = kind.endswith("bdf2")

    if kind in ("s1", "s1_bdf2"):
        model = EnergyModel([PowerLaw(1.0, m), Potential(v)])
        cfg = SchemeConfig(kind, dt, model=model, epsilon_floor=TIGHT.floor, newton=TIGHT)
        state = TimeState(rho=rho.copy(), rho_prev=prev.copy() if bdf2 else None)
        new, _ = advance(state, cfg, grid)
        if bdf2:
            ref = oracle.oracle_s1_bdf2(lr, lp, h=h, dt=dt, m=m, v=lv)
        else:
            ref = oracle.oracle_s1(lr, h=h, dt=dt, m=m, v=lv)
        return new.rho, np.array(ref), None, None

    if kind == "onsager":
        model = EnergyModel([Entropy(2.0)])
        s = make_splitting(model, None, 1.0)
        mob = fisher_kpp_mobilities(p["alpha"])
        cfg = SchemeConfig(kind, dt, splitting=s, mobilities=mob,
                           epsilon_floor=TIGHT.floor, newton=TIGHT)
        state, r_n, _, C = _state(grid, s, p, False)
        new, _ = advance(state, cfg, grid)
        ref, r_ref = oracle.oracle_onsager(lr, r_n, C, h=h, dt=dt, alpha=p["alpha"])
        return new.rho, np.array(ref), new.r, r_ref

    kappa = p["kappa"]
    model = EnergyModel([PowerLaw(1.0, m), Potential(v)])
    s = make_splitting(model, None, kappa)
    cfg = SchemeConfig(kind, dt, splitting=s, epsilon_floor=TIGHT.floor, newton=TIGHT)
    state, r_n, r_p, C = _state(grid, s, p, bdf2)
    new, _ = advance(state, cfg, grid)
    if bdf2:
        ref, r_ref = oracle.oracle_s2_bdf2(lr, lp, r_n, r_p, C, h=h, dt=dt, m=m, v=lv, kappa=kappa)
    else:
        ref, r_ref = oracle.oracle_s2(lr, r_n, C, h=h, dt=dt, m=m, v=lv, kappa=kappa)
    return new.rho, np.array(ref), new.r, r_ref


def rel_gap(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def systems_on_8_cells(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(1, 8, 1.0)
    v = rng.uniform(-1, 1, 8)
    rho = rng.uniform(0.3, 2.0, 8)
    prev = rho * rng.uniform(0.8, 1.2, 8)
    model = EnergyModel([PowerLaw(1.0, 2.5), Potential(v)])
    s = make_splitting(model, C=5.0, entropy_coeff=0.5)
    out = {}
    for kind in SCHEMES:
        if kind == "onsager":
            cfg = SchemeConfig(kind, 0.01, splitting=make_splitting(EnergyModel([Entropy(2.0)]), C=5.0),
                               mobilities=fisher_kpp_mobilities(0.3))
        else:
            cfg = SchemeConfig(kind, 0.01, model=model, splitting=s)
        st0 = init_state(prev, cfg, g)
        state = TimeState(rho=rho, rho_prev=prev if cfg.kind.is_bdf2 else None,
                          r=st0.r, r_prev=st0.r, C=st0.C)
        out[kind] = (step_system(state, cfg, g), rng.uniform(0.3, 2.0, 8))
    return out
