import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgflow.diagnostics import (
    Expectations,
    RunTrace,
    TraceRecord,
    audit,
    error_inf,
    error_l2,
    observed_order,
    window_means,
)
from wgflow.grid import build_grid


def trace_of(mass, energy, newton=None, min_rho=None):
    n = len(mass)
    newton = newton if newton is not None else [0] + [2] * (n - 1)
    min_rho = min_rho if min_rho is not None else [1.0] * n
    t = RunTrace()
    for i in range(n):
        t.append(TraceRecord(i, 0.1 * i, mass[i], energy[i], energy[i], min_rho[i], newton[i]))
    return t


def test_error_norms():
    g = build_grid(1, 2, 2.0)
    assert error_inf(g, [3.0, 4.0], [0.0, 0.0]) == 4.0
    assert error_l2(g, [3.0, 4.0], np.zeros(2)) == 5.0
    f = np.array([1.0, 2.0])
    assert error_inf(g, f, f) == 0.0 and error_l2(g, f, f) == 0.0
    # callable targets are sampled at cell centers
    assert error_inf(g, g.coords()[0], lambda x: x) == 0.0


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_l2_triangle(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(2, 6, 1.0)
    a, b, c = (rng.standard_normal(g.size) for _ in range(3))
    assert error_l2(g, a, c) <= error_l2(g, a, b) + error_l2(g, b, c) + 1e-14


def test_observed_order():
    assert observed_order([(0.1, 1e-2), (0.05, 5e-3)]) == [pytest.approx(1.0, abs=1e-14)]
    assert observed_order([(0.1, 8.1540e-3), (0.05, 4.1101e-3)])[0] == pytest.approx(0.9883, abs=5e-5)
    assert observed_order([(0.1, 4e-2), (0.05, 1e-2)]) == [pytest.approx(2.0, abs=1e-14)]
    assert observed_order([(0.1, 1.0)]) == []
    with pytest.raises(ValueError):
        observed_order([(0.1, 0.0), (0.05, 1.0)])


@given(st.floats(1e-6, 1e6))
def test_order_scale_invariant(c):
    e = [(0.1, 3e-3), (0.05, 1.4e-3), (0.025, 7.2e-4)]
    scaled = [(dt, c * x) for dt, x in e]
    assert np.allclose(observed_order(scaled), observed_order(e), atol=1e-12)


def test_window_means():
    assert window_means(np.arange(100)) == [24.5, 74.5]
    assert window_means(np.ones(49)) == []


def test_audit_constant_run():
    a = audit(trace_of([2.0] * 11, [-1.0] * 11), Expectations(mass_tol=1e-12, min_rho=0.5))
    assert a.ok and a.max_mass_drift == 0.0 and a.max_energy_increase == 0.0 and a.steps == 10


def test_audit_flags():
    t = trace_of([1.0, 1.0, 1.1], [1.0, 0.5, 0.7], newton=[0, 3, 60], min_rho=[1, 1e-7, 1])
    a = audit(t, Expectations(mass_tol=1e-3, min_rho=1e-6, energy_rtol=1e-8, max_newton=50))
    assert len(a.violations) == 4
    assert a.max_energy_increase == pytest.approx(0.2) and a.max_newton == 60
    assert a.total_mass_change == pytest.approx(0.1)


def test_audit_windows():
    t = trace_of([1.0] * 101, [1.0] * 101, newton=[0] + [3] * 50 + [12] * 50)
    assert audit(t).window_means == [3.0, 12.0]
    assert not audit(t, Expectations(window_mean_max=10)).ok


@settings(max_examples=40)
@given(seed=st.integers(0, 2**32 - 1))
def test_tightening_only_adds_failures(seed):
    rng = np.random.default_rng(seed)
    n = 60
    t = trace_of(1 + 1e-9 * rng.standard_normal(n), np.cumsum(rng.uniform(-1, 0.01, n)),
                 newton=[0] + list(rng.integers(1, 20, n - 1)), min_rho=rng.uniform(1e-7, 1, n))
    loose = Expectations(mass_tol=1e-8, min_rho=1e-8, energy_rtol=1e-1, max_newton=30, window_mean_max=15)
    tight = Expectations(mass_tol=1e-9, min_rho=1e-6, energy_rtol=1e-3, max_newton=10, window_mean_max=5)
    assert len(audit(t, tight).violations) >= len(audit(t, loose).violations)
    assert set(v.split()[0] for v in audit(t, loose).violations) <= set(
        v.split()[0] for v in audit(t, tight).violations)


def test_trace_guards():
    with pytest.raises(ValueError):
        audit(RunTrace())
    t = trace_of([1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        t.append(TraceRecord(1, 0.1, 1.0, 0.0, 0.0, 1.0, 1))
