import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import cases
import oracle
from wgflow.benchmarks import fisher_kpp_mobilities
from wgflow.energy import EnergyModel, Entropy, Potential, PowerLaw, eval_E1, make_splitting
from wgflow.grid import build_grid
from wgflow.schemes import (
    ConfigError,
    Scheme,
    SchemeConfig,
    StepFailure,
    TimeState,
    advance,
    extrapolate_positive,
    init_state,
    step_onsager,
    step_s1,
    step_s2,
)
from wgflow.solver import NewtonConfig, jacobian_fd_check

ORACLE_TOL = 1e-9


def bisect(f, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- extrapolation --------------------------------------------------------------


def test_extrapolate_branches():
    assert extrapolate_positive(2.0, 1.0) == 3.0
    assert extrapolate_positive(1.0, 2.0) == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert extrapolate_positive(1.7, 1.7) == pytest.approx(1.7, rel=1e-15)


@given(st.floats(1e-8, 1e8), st.floats(1e-8, 1e8))
def test_extrapolate_positive_and_between_bounds(a, b):
    e = extrapolate_positive(a, b)
    assert e > 0
    # never below the smaller of the two branches' natural bounds
    if a >= b:
        assert e >= a
    else:
        assert 0 < e <= a


def test_extrapolate_rejects_nonpositive():
    with pytest.raises(ValueError):
        extrapolate_positive(np.array([1.0, 0.0]), np.array([1.0, 1.0]))


# -- fixed points and closed-form small cases ----------------------------------


@pytest.mark.parametrize("kind", ["s1", "s1_bdf2", "s2", "s2_bdf2"])
def test_constant_is_fixed_point(kind):
    g = build_grid(1, 16, 1.0)
    model = EnergyModel([PowerLaw(1.0, 2.0), Entropy(0.5)])
    cfg = SchemeConfig(kind, 0.05, model=model, splitting=make_splitting(model))
    state = init_state(np.full(g.size, 0.7), cfg, g)
    for _ in range(3):
        state, rep = advance(state, cfg, g)
        assert rep.newton_iterations <= 1
    assert np.max(np.abs(state.rho - 0.7)) < 1e-13


def test_two_cell_heat_s1():
    g = build_grid(1, 2, 2.0)
    cfg = SchemeConfig("s1", 1.0, model=EnergyModel([Entropy(1.0)]),
                       newton=NewtonConfig(tol_residual=1e-14))
    new, _ = step_s1(TimeState(rho=np.array([1.0, 3.0])), cfg, g)
    rho1 = bisect(lambda x: x - 1 - 2 * math.log((4 - x) / x), 1e-9, 4 - 1e-9)
    assert new.rho == pytest.approx([rho1, 4 - rho1], abs=1e-12)


def test_two_cell_pme_s2():
    g = build_grid(1, 2, 2.0)
    s = make_splitting(EnergyModel([PowerLaw(1.0, 3.0)]), C=0.0)
    cfg = SchemeConfig("s2", 0.1, splitting=s, newton=NewtonConfig(tol_residual=1e-14, floor=1e-12),
                       epsilon_floor=1e-12)
    state = init_state(np.array([1.0, 3.0]), cfg, g)
    assert state.r == pytest.approx(math.sqrt(eval_E1(s, state.rho, g)))
    new, _ = step_s2(state, cfg, g)
    ref, r_ref = oracle.oracle_s2([1.0, 3.0], state.r, 0.0, h=1.0, dt=0.1, m=3.0, v=[0.0, 0.0], kappa=1.0)
    assert np.max(np.abs(new.rho - ref)) < 1e-10
    assert new.r == pytest.approx(r_ref, abs=1e-10)


def test_pure_entropy_s2_keeps_r():
    g = build_grid(1, 8, 1.0)
    s = make_splitting(EnergyModel([Entropy(1.0)]), C=1.0)
    assert s.e1_terms == ()
    cfg = SchemeConfig("s2", 0.1, splitting=s)
    state = init_state(np.full(g.size, 2.0), cfg, g)
    assert state.r == 1.0
    new, _ = advance(state, cfg, g)
    assert new.r == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(new.rho - 2.0)) < 1e-13


def test_onsager_without_reaction_is_s2():
    g = build_grid(1, 12, 1.0)
    x = g.coords()[0]
    s = make_splitting(EnergyModel([PowerLaw(1.0, 2.0), Potential(np.sin(3 * x))]), C=2.0)
    rho0 = 1.0 + 0.5 * np.cos(np.pi * x)
    tight = NewtonConfig(tol_residual=1e-14)
    cfg2 = SchemeConfig("s2", 0.01, splitting=s, newton=tight)
    cfgo = SchemeConfig("onsager", 0.01, splitting=s, newton=tight,
                        mobilities=(lambda r: r, lambda r: np.zeros_like(r)))
    a, _ = step_s2(init_state(rho0, cfg2, g), cfg2, g)
    b, _ = step_onsager(init_state(rho0, cfgo, g), cfgo, g)
    assert np.max(np.abs(a.rho - b.rho)) < 1e-12
    assert a.r == pytest.approx(b.r, abs=1e-12)


def test_fisher_kpp_one_is_fixed_point():
    g = build_grid(1, 10, 1.0)
    s = make_splitting(EnergyModel([Entropy(2.0)]), C=5.0)
    cfg = SchemeConfig("onsager", 1e-3, splitting=s, mobilities=fisher_kpp_mobilities())
    state = init_state(np.ones(g.size), cfg, g)
    new, _ = advance(state, cfg, g)
    assert np.max(np.abs(new.rho - 1.0)) < 1e-14
    assert new.r == pytest.approx(state.r, abs=1e-14)


def test_mass_and_positivity_s1_pme():
    g = build_grid(1, 40, 4.0, -2.0)
    model = EnergyModel([PowerLaw(1.0, 3.0)])
    cfg = SchemeConfig("s1", 0.01, model=model)
    rho = np.where(np.abs(g.coords()[0]) < 0.5, 1.0, 1e-6)
    state = init_state(rho, cfg, g)
    m0 = g.cell_volume * state.rho.sum()
    for _ in range(10):
        state, rep = advance(state, cfg, g)
        assert abs(rep.mass - m0) <= 1e-10 * g.volume
        assert rep.min_rho >= 1e-6


def test_bdf2_first_step_falls_back_to_first_order():
    g = build_grid(1, 8, 1.0)
    model = EnergyModel([Entropy(1.0)])
    rho0 = 1.0 + 0.3 * np.cos(np.pi * g.coords()[0])
    a, _ = advance(TimeState(rho=rho0), SchemeConfig("s1", 0.05, model=model), g)
    b, _ = advance(TimeState(rho=rho0), SchemeConfig("s1_bdf2", 0.05, model=model), g)
    assert np.array_equal(a.rho, b.rho)
    assert np.array_equal(b.rho_prev, rho0)


def test_step_failure_is_raised():
    g = build_grid(1, 8, 1.0)
    cfg = SchemeConfig("s1", 0.5, model=EnergyModel([PowerLaw(1.0, 3.0)]),
                       newton=NewtonConfig(max_iter=1))
    rho0 = np.where(g.coords()[0] < 0.5, 3.0, 1e-3)
    with pytest.raises(StepFailure) as exc:
        advance(TimeState(rho=rho0), cfg, g)
    assert exc.value.report is not None and not exc.value.report.converged


def test_config_validation():
    model = EnergyModel([Entropy(1.0)])
    with pytest.raises(ConfigError):
        SchemeConfig("s1", -0.1, model=model)
    with pytest.raises(ConfigError):
        SchemeConfig("s2", 0.1, model=model)
    with pytest.raises(ConfigError):
        SchemeConfig("onsager", 0.1, splitting=make_splitting(model))
    assert Scheme("s2_bdf2").is_bdf2 and Scheme("onsager").is_sav


def test_init_state_rejects_nonpositive_r():
    g = build_grid(1, 4, 1.0)
    s = make_splitting(EnergyModel([PowerLaw(1.0, 2.0)]), C=-100.0)
    with pytest.raises(ConfigError):
        init_state(np.ones(4), SchemeConfig("s2", 0.1, splitting=s), g)


# -- brute-force equivalence ----------------------------------------------------


@pytest.mark.parametrize("kind", cases.SCHEMES)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), cells=st.sampled_from([2, 3]))
def test_matches_bisection_oracle(kind, seed, cells):
    p = cases.draw(np.random.default_rng(seed), cells)
    rho, ref, r, r_ref = cases.run_case(kind, p)
    assert cases.rel_gap(rho, ref) <= ORACLE_TOL
    if r is not None:
        assert abs(r - r_ref) <= ORACLE_TOL * max(1.0, abs(r_ref))


# -- Jacobians --------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_jacobian_matches_differences(seed):
    for kind, (system, x) in cases.systems_on_8_cells(seed).items():
        gap = jacobian_fd_check(system.residual, system.jacobian, x, seed=seed)
        assert gap <= 1e-6, kind
