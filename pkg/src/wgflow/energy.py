"""Energy functionals built from pointwise terms, and the entropy splitting.

An :class:`EnergyModel` is a sum of terms ``E(rho) = sum_i int e_i(rho, x) dx``.
For the scalar auxiliary variable schemes the model is split as
``E = E1 + kappa * int rho (log rho - 1)``; ``E1`` is carried as a term list
that includes a negative entropy term, so its derivative reuses the same code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .grid import Grid, integrate


class DomainError(ValueError):
    """Density outside the domain of a term (e.g. nonpositive under a log)."""


class AdmissibilityError(ValueError):
    """H'' is not strictly positive, so the S1 scheme does not apply."""


@dataclass(frozen=True)
class Entropy:
    """``coeff * rho (log rho - 1)``."""

    coeff: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.coeff):
            raise ValueError("Entropy.coeff must be finite")


@dataclass(frozen=True)
class PowerLaw:
    """``coeff * rho**m / (m - 1)`` with ``m > 1``."""

    coeff: float = 1.0
    m: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.coeff):
            raise ValueError("PowerLaw.coeff must be finite")
        if not self.m > 1:
            raise ValueError(f"PowerLaw.m must exceed 1, got {self.m}")


@dataclass(frozen=True, eq=False)
class Potential:
    """Linear term ``rho * v`` with ``v`` sampled at cell centers."""

    v: np.ndarray


@dataclass(frozen=True, eq=False)
class CustomH:
    """User-supplied density ``H`` with its first two derivatives (all pointwise)."""

    H: Callable[[np.ndarray], np.ndarray]
    dH: Callable[[np.ndarray], np.ndarray]
    d2H: Callable[[np.ndarray], np.ndarray]


EnergyTerm = Union[Entropy, PowerLaw, Potential, CustomH]


@dataclass(frozen=True)
class EnergyModel:
    terms: tuple

    def __init__(self, terms: Sequence[EnergyTerm]):
        terms = tuple(terms)
        if not terms:
            raise ValueError("an energy model needs at least one term")
        object.__setattr__(self, "terms", terms)

    @property
    def potential(self) -> np.ndarray | None:
        """Sum of all potential fields, or ``None`` when there are none."""
        vs = [t.v for t in self.terms if isinstance(t, Potential)]
        if not vs:
            return None
        return np.sum(vs, axis=0)

    @property
    def h_terms(self) -> tuple:
        return tuple(t for t in self.terms if not isinstance(t, Potential))


@dataclass(frozen=True)
class Splitting:
    """``E = E1 + entropy_coeff * int rho (log rho - 1)`` with SAV constant ``C``.

    ``C = None`` means "choose at initialization" (see :func:`resolve_C`).
    """

    e1_terms: tuple
    C: float | None = None
    entropy_coeff: float = 1.0
    model: EnergyModel | None = field(default=None, compare=False)


def _positive(rho: np.ndarray, what: str) -> None:
    if np.any(~(rho > 0)):
        raise DomainError(f"{what} requires rho > 0 (min {np.nanmin(rho):.3e})")


def _density(term, rho):
    if isinstance(term, Entropy):
        if term.coeff == 0:
            return np.zeros_like(rho)
        _positive(rho, "entropy")
        return term.coeff * rho * (np.log(rho) - 1.0)
    if isinstance(term, PowerLaw):
        _positive_or_zero(rho)
        return term.coeff * rho**term.m / (term.m - 1.0)
    if isinstance(term, Potential):
        return rho * term.v
    return np.asarray(term.H(rho), dtype=float)


def _first(term, rho):
    if isinstance(term, Entropy):
        if term.coeff == 0:
            return np.zeros_like(rho)
        _positive(rho, "entropy")
        return term.coeff * np.log(rho)
    if isinstance(term, PowerLaw):
        _positive_or_zero(rho)
        return term.coeff * term.m / (term.m - 1.0) * rho ** (term.m - 1.0)
    if isinstance(term, Potential):
        return np.broadcast_to(term.v, rho.shape).astype(float)
    return np.asarray(term.dH(rho), dtype=float)


def _second(term, rho):
    if isinstance(term, Entropy):
        _positive(rho, "entropy")
        return term.coeff / rho
    if isinstance(term, PowerLaw):
        _positive_or_zero(rho)
        return term.coeff * term.m * rho ** (term.m - 2.0)
    if isinstance(term, Potential):
        return np.zeros_like(rho)
    return np.asarray(term.d2H(rho), dtype=float)


def _positive_or_zero(rho):
    if np.any(~(rho >= 0)):
        raise DomainError("power-law term requires rho >= 0")


def _sum_pointwise(fn, terms, rho):
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    for t in terms:
        out = out + fn(t, rho)
    return out


def energy_density(terms, rho) -> np.ndarray:
    return _sum_pointwise(_density, terms, rho)


def eval_energy(model: EnergyModel, rho, grid: Grid) -> float:
    rho = grid.check(rho, "rho")
    return integrate(grid, energy_density(model.terms, rho))


def variational_derivative(model: EnergyModel, rho) -> np.ndarray:
    """Pointwise ``dE/drho``: ``H'(rho) + v`` summed over terms."""
    return _sum_pointwise(_first, model.terms, rho)


def second_derivative_H(model: EnergyModel, rho) -> np.ndarray:
    """Pointwise ``H''(rho)`` (potentials contribute nothing).

    Raises :class:`AdmissibilityError` if the result is not strictly positive.
    """
    d2 = _sum_pointwise(_second, model.h_terms, rho)
    if np.any(~(d2 > 0)):
        raise AdmissibilityError("H'' must be strictly positive for the S1 scheme")
    return d2


def entropy(rho, grid: Grid) -> float:
    """``int rho (log rho - 1)``."""
    return integrate(grid, _density(Entropy(1.0), np.asarray(rho, dtype=float)))


def _merge_entropies(terms) -> tuple:
    coeff = sum(t.coeff for t in terms if isinstance(t, Entropy))
    rest = [t for t in terms if not isinstance(t, Entropy)]
    if coeff != 0.0:
        rest.insert(0, Entropy(coeff))
    return tuple(rest)


def make_splitting(model: EnergyModel, C=None, entropy_coeff: float = 1.0) -> Splitting:
    """Split off ``entropy_coeff * int rho (log rho - 1)`` as the convex part.

    Entropy terms are merged, so a pure-entropy model with a matching
    coefficient leaves ``E1`` with no terms at all.
    """
    if not entropy_coeff > 0:
        raise ValueError("entropy_coeff must be positive")
    e1 = _merge_entropies(list(model.terms) + [Entropy(-entropy_coeff)])
    return Splitting(e1_terms=e1, C=C, entropy_coeff=float(entropy_coeff), model=model)


def eval_E1(s: Splitting, rho, grid: Grid) -> float:
    rho = grid.check(rho, "rho")
    _positive(rho, "E1")
    return integrate(grid, energy_density(s.e1_terms, rho))


def dE1(s: Splitting, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    _positive(rho, "E1")
    return _sum_pointwise(_first, s.e1_terms, rho)


def resolve_C(s: Splitting, rho0, grid: Grid) -> float:
    """SAV constant: ``s.C`` if set, else ``max(1, 1 - E1(rho0))``."""
    if s.C is not None:
        return float(s.C)
    return max(1.0, 1.0 - eval_E1(s, rho0, grid))
