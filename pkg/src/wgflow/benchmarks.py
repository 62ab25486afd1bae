"""Benchmark problems: closed-form solutions, potentials, mobilities, initial data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .energy import EnergyModel, Entropy, Potential, PowerLaw, Splitting, make_splitting
from .grid import Grid, build_grid

EPS = 1e-6
V2_SERIES_HALF_WIDTH = 1e-3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def barenblatt(x, t, m=3.0, d=2):
    """Self-similar PME solution ``B_{m,d}``; ``x`` has the spatial axis first.

    ``x`` may be a scalar (1D), a length-``d`` point, or a tuple of coordinate
    arrays as returned by :meth:`Grid.coords`.
    """
    alpha = d / (d * (m - 1.0) + 2.0)
    if np.ndim(x) == 0:
        r2 = np.asarray(x, dtype=float) ** 2
    else:
        r2 = sum(np.asarray(xi, dtype=float) ** 2 for xi in x)
    s = 1.0 - alpha * (m - 1.0) / (2.0 * m * d) * r2 / (t + 1.0) ** (2.0 * alpha / d)
    return (t + 1.0) ** (-alpha) * np.maximum(s, 0.0) ** (1.0 / (m - 1.0))


def heat_exact(x, t):
    """``exp(-pi^2 t / 50) cos(pi x) + 1.1`` on [0, 1] (Neumann)."""
    return np.exp(-np.pi**2 * t / 50.0) * np.cos(np.pi * np.asarray(x, dtype=float)) + 1.1


def heat_kernel(x, t):
    """``exp(-|x|^2 / (4t)) / (4 pi t)`` in 2D; ``x`` as in :func:`barenblatt`."""
    r2 = sum(np.asarray(xi, dtype=float) ** 2 for xi in x)
    return np.exp(-r2 / (4.0 * t)) / (4.0 * np.pi * t)


def _quadratic(x, y=0.0):
    return 0.5 * (np.asarray(x) ** 2 + np.asarray(y) ** 2)


def _sinusoidal(x, y):
    return 1.0 - np.sin(5.0 * np.pi * np.asarray(x)) * np.sin(3.0 * np.pi * np.asarray(y))


_POTENTIALS = {"quadratic": _quadratic, "sinusoidal": _sinusoidal}


def drift_potentials(name: str) -> Callable:
    try:
        return _POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(_POTENTIALS)}") from None


def _v2(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise ValueError("V2 needs rho > 0")
    s = rho - 1.0
    near = np.abs(s) < V2_SERIES_HALF_WIDTH
    # (rho - 1) / log(rho) = 1 + s/2 - s^2/12 + s^3/24 + O(s^4)
    series = 1.0 + s * (0.5 + s * (-1.0 / 12.0 + s / 24.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = s / np.log(np.where(near, 2.0, rho))
    return 0.5 * rho * np.where(near, series, direct)


def fisher_kpp_mobilities(alpha: float = 1e-4) -> tuple[Callable, Callable]:
    """``V1 = alpha rho`` and ``V2 = rho (rho - 1) / (2 log rho)``, the latter
    continued through its removable singularity at ``rho = 1``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    def V1(rho):
        return alpha * np.asarray(rho, dtype=float)

    return V1, _v2


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of the splitmix64 generator started at ``seed``."""
    k = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed % 2**64) + k * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def seeded_random_field(grid: Grid, seed: int = 1, low: float = EPS, high: float = 1.0) -> np.ndarray:
    """Bit-reproducible uniform field on ``[low, high]`` in lexicographic cell order."""
    if not low >= EPS or not high > low:
        raise ValueError("need eps <= low < high")
    z = splitmix64(seed, grid.size)
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return low + (high - low) * u


@dataclass
class ProblemSpec:
    """One benchmark: grid, energy, default step parameters and initial data.

    ``exact(t)`` returns cell samples of a closed-form solution when one exists;
    ``reference`` is a fixed target field (e.g. a steady state).
    """

    name: str
    grid: Grid
    model: EnergyModel
    dt: float
    T: float
    initial: np.ndarray
    scheme: str
    C: float | None = None
    entropy_coeff: float = 1.0
    exact: Callable[[float], np.ndarray] | None = None
    reference: np.ndarray | None = None
    mobilities: tuple | None = None
    params: dict = field(default_factory=dict)

    def splitting(self) -> Splitting:
        return make_splitting(self.model, self.C, self.entropy_coeff)


PROBLEMS = ("heat", "pme_barenblatt", "fokker_planck", "pme_drift", "fisher_kpp", "custom")


def _take(overrides, key, default):
    return overrides.pop(key, default)


def build_problem(name: str, **overrides) -> ProblemSpec:
    """Build a named benchmark with its reference defaults, then apply overrides.

    Common overrides: ``cells``, ``dt``, ``T``, ``extent``, ``origin``, ``C``,
    ``scheme``.  Problem-specific: ``m`` (PME), ``seed``/``low``/``high``
    (pme_drift), ``alpha`` (fisher_kpp), ``potential`` (fokker_planck, pme_drift).
    """
    o = dict(overrides)
    builders = {
        "heat": _heat,
        "pme_barenblatt": _barenblatt,
        "fokker_planck": _fokker_planck,
        "pme_drift": _pme_drift,
        "fisher_kpp": _fisher_kpp,
        "custom": _custom,
    }
    if name not in builders:
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEMS}")
    spec = builders[name](o)
    for key in ("dt", "T", "scheme", "C"):
        if key in o:
            setattr(spec, key, o.pop(key))
    if o:
        raise ValueError(f"unused overrides for {name}: {sorted(o)}")
    return spec


def _grid(o, dim, cells, extent, origin, bc="neumann"):
    return build_grid(
        dim,
        _take(o, "cells", cells),
        _take(o, "extent", extent),
        _take(o, "origin", origin),
        _take(o, "bc", bc),
    )


def _heat(o):
    grid = _grid(o, 1, 2000, 1.0, 0.0)
    (x,) = grid.coords()
    return ProblemSpec(
        name="heat",
        grid=grid,
        model=EnergyModel([Entropy(1.0 / 50.0)]),
        dt=0.1,
        T=1.0,
        initial=heat_exact(x, 0.0),
        scheme="s1",
        entropy_coeff=1.0 / 100.0,
        exact=lambda t: heat_exact(x, t),
    )


def _barenblatt(o):
    m = float(_take(o, "m", 3.0))
    grid = _grid(o, 2, 80, 20.0, -10.0)
    xy = grid.coords()
    return ProblemSpec(
        name="pme_barenblatt",
        grid=grid,
        model=EnergyModel([PowerLaw(1.0, m)]),
        dt=1e-3,
        T=1.0,
        initial=np.maximum(barenblatt(xy, 0.0, m, 2), EPS),
        scheme="s2",
        C=0.0,
        exact=lambda t: barenblatt(xy, t, m, 2),
        params={"m": m},
    )


def _fokker_planck(o):
    pot = _take(o, "potential", "quadratic")
    grid = _grid(o, 2, 100, 10.0, -5.0)
    xy = grid.coords()
    v = drift_potentials(pot)(*xy)
    return ProblemSpec(
        name="fokker_planck",
        grid=grid,
        model=EnergyModel([Entropy(1.0), Potential(v)]),
        dt=1e-3,
        T=4.0,
        initial=heat_kernel(xy, 1.0),
        scheme="s2",
        C=10.0,
        reference=heat_kernel(xy, 0.5),
        params={"potential": pot},
    )


def _pme_drift(o):
    m = float(_take(o, "m", 2.0))
    pot = _take(o, "potential", "sinusoidal")
    seed = int(_take(o, "seed", 1))
    low = float(_take(o, "low", EPS))
    high = float(_take(o, "high", 1.0))
    grid = _grid(o, 2, 50, 2.0, -1.0)
    v = drift_potentials(pot)(*grid.coords())
    return ProblemSpec(
        name="pme_drift",
        grid=grid,
        model=EnergyModel([PowerLaw(1.0, m), Potential(v)]),
        dt=1e-4,
        T=0.04 if m < 20 else 0.4,
        initial=seeded_random_field(grid, seed, low, high),
        scheme="s2",
        params={"m": m, "potential": pot, "seed": seed},
    )


def _fisher_kpp(o):
    alpha = float(_take(o, "alpha", 1e-4))
    grid = _grid(o, 1, 100, 1.0, 0.0)
    (x,) = grid.coords()
    return ProblemSpec(
        name="fisher_kpp",
        grid=grid,
        model=EnergyModel([Entropy(2.0)]),
        dt=1e-4,
        T=10.0,
        initial=np.where(x < 0.5, 0.4, EPS),
        scheme="onsager",
        C=5.0,
        mobilities=fisher_kpp_mobilities(alpha),
        params={"alpha": alpha},
    )


def _custom(o):
    try:
        grid = o.pop("grid")
        model = o.pop("model")
        initial = np.asarray(o.pop("initial"), dtype=float)
    except KeyError as exc:
        raise ValueError(f"custom problem needs override {exc.args[0]!r}") from None
    return ProblemSpec(
        name="custom",
        grid=grid,
        model=model,
        dt=float(o.pop("dt", 1e-3)),
        T=float(o.pop("T", 1.0)),
        initial=initial,
        scheme=o.pop("scheme", "s2"),
        entropy_coeff=float(o.pop("entropy_coeff", 1.0)),
        mobilities=o.pop("mobilities", None),
    )
