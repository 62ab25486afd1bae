"""Damped Newton iteration with a positivity floor, and its banded linear solves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.linalg import LinAlgError, solve_banded

LINEAR_RTOL = 1e-12


class LinearSolveError(RuntimeError):
    """The Jacobian (or its rank-one update) could not be inverted."""


@dataclass
class SparseOperator:
    """``A + u w^T`` with ``A`` stored as diagonals.

    ``bands[k][j] == A[j - k, j]`` (``scipy.sparse.dia_matrix`` layout), which
    makes column scaling a broadcast multiply and, for contiguous offsets,
    is exactly the ``ab`` layout expected by :func:`scipy.linalg.solve_banded`.
    """

    bands: dict[int, np.ndarray]
    u: np.ndarray | None = None
    w: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.bands[0])

    def matrix(self) -> sparse.csc_matrix:
        offsets = sorted(self.bands)
        data = np.array([self.bands[k] for k in offsets])
        n = self.size
        return sparse.dia_matrix((data, offsets), shape=(n, n)).tocsc()

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.size
        out = np.zeros(n)
        for k, d in self.bands.items():
            # A[i, i + k] = d[i + k]
            if k >= 0:
                out[: n - k] += d[k:] * x[k:]
            else:
                out[-k:] += d[: n + k] * x[: n + k]
        if self.u is not None:
            out += self.u * np.dot(self.w, x)
        return out

    def pin_rows(self, rows) -> "SparseOperator":
        """Copy with the masked rows replaced by rows of the identity."""
        rows = np.asarray(rows, dtype=bool)
        if not rows.any():
            return self
        n = self.size
        bands = {}
        for k, d in self.bands.items():
            d = d.copy()
            i = np.arange(n) - k
            hit = (i >= 0) & (i < n)
            hit[hit] = rows[i[hit]]
            d[hit] = 1.0 if k == 0 else 0.0
            bands[k] = d
        if 0 not in bands:
            bands[0] = rows.astype(float)
        u = None if self.u is None else np.where(rows, 0.0, self.u)
        return SparseOperator(bands, u, self.w)

    def toarray(self) -> np.ndarray:
        A = self.matrix().toarray()
        if self.u is not None:
            A = A + np.outer(self.u, self.w)
        return A


class _Factor:
    """LU of the banded part; tridiagonal systems go through LAPACK gbsv."""

    def __init__(self, op: SparseOperator):
        offsets = sorted(op.bands)
        lo, hi = -offsets[0], offsets[-1]
        self._banded = lo <= 2 and hi <= 2
        if self._banded:
            n = op.size
            ab = np.zeros((lo + hi + 1, n))
            for k in offsets:
                ab[hi - k] = op.bands[k]
            self._ab, self._lu = ab, (lo, hi)
        else:
            try:
                self._splu = spla.splu(op.matrix())
            except RuntimeError as exc:
                raise LinearSolveError(str(exc)) from exc

    def solve(self, b):
        if self._banded:
            try:
                return solve_banded(self._lu, self._ab, b, check_finite=False)
            except (LinAlgError, ValueError) as exc:
                raise LinearSolveError(str(exc)) from exc
        return self._splu.solve(b)


def linear_solve(op: SparseOperator, rhs, max_refine: int = 3) -> np.ndarray:
    """Solve ``(A + u w^T) x = rhs``; the rank-one part via Sherman-Morrison.

    Iterative refinement is applied until the relative 2-norm residual is at
    most ``1e-12``.
    """
    rhs = np.asarray(rhs, dtype=float)
    factor = _Factor(op)
    if op.u is None:
        apply_inv = factor.solve
    else:
        z = factor.solve(op.u)
        denom = 1.0 + np.dot(op.w, z)
        if not np.isfinite(denom) or abs(denom) < 1e-14 * (1.0 + abs(np.dot(op.w, z))):
            raise LinearSolveError("rank-one update makes the operator singular")

        def apply_inv(b):
            y = factor.solve(b)
            return y - z * (np.dot(op.w, y) / denom)

    x = apply_inv(rhs)
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("non-finite solution")
    bnorm = np.linalg.norm(rhs)
    for _ in range(max_refine):
        res = rhs - op.matvec(x)
        if np.linalg.norm(res) <= LINEAR_RTOL * bnorm:
            break
        x = x + apply_inv(res)
    return x


@dataclass
class NewtonConfig:
    """Damped Newton settings.

    ``tol_residual = None`` means ``1e-12 * max(1, |R(x0)|_inf)``.
    """

    tol_residual: float | None = None
    tol_step: float = 1e-12
    max_iter: int = 50
    theta_boundary: float = 0.9
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    floor: float = 1e-6

    def __post_init__(self):
        if self.tol_residual is not None and not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not 0 < self.theta_boundary < 1:
            raise ValueError("theta_boundary must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        for name in ("tol_step", "max_iter", "max_backtracks", "floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    backtrack_counts: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    converged: bool = False
    tolerance: float = 0.0
    message: str = ""

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else np.inf


def boundary_step(x, d, theta) -> float:
    """Largest ``lam <= 1`` with ``x + lam d >= (1 - theta) x`` where ``d < 0``."""
    neg = d < 0
    if not np.any(neg):
        return 1.0
    with np.errstate(over="ignore"):
        return float(min(1.0, theta * np.min(x[neg] / -d[neg])))


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], SparseOperator],
    x0,
    cfg: NewtonConfig | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``residual(x) = 0`` subject to ``x >= floor``.

    Each step solves ``J d = -R``, shortens it by the fraction-to-boundary rule,
    then halves it until the max-norm residual decreases; the accepted iterate
    is clamped at ``cfg.floor``.  Nonconvergence is reported, not raised.

    Where the root lies below the floor there is no root to find, so the
    residual measured is ``min(x - floor, R)``: zero both at a root and at a
    floor cell whose residual pushes it further down.  Rows where the first
    branch is active are sent straight to the floor (a semismooth Newton step),
    so such cells settle in one iteration instead of crawling toward it.

    A step shorter than ``tol_step * max(1, |x|_inf)`` that does not reduce
    the residual is accepted as converged (round-off stagnation).
    """
    cfg = cfg or NewtonConfig()
    x = np.maximum(np.asarray(x0, dtype=float), cfg.floor)

    def evaluate(x):
        R = residual(x)
        return R, float(np.max(np.abs(np.minimum(x - cfg.floor, R))))

    R, rnorm = evaluate(x)
    tol = cfg.tol_residual if cfg.tol_residual is not None else 1e-12 * max(1.0, rnorm)
    report = SolveReport(residual_history=[rnorm], tolerance=tol)

    while True:
        if rnorm <= tol:
            report.converged = True
            return x, report
        if report.iterations >= cfg.max_iter:
            report.message = f"no convergence after {cfg.max_iter} iterations"
            return x, report

        try:
            active = x - cfg.floor < R
            d = linear_solve(jacobian(x).pin_rows(active), np.where(active, cfg.floor - x, -R))
        except LinearSolveError as exc:
            report.message = f"linear solve failed: {exc}"
            return x, report
        report.iterations += 1
        step_small = np.max(np.abs(d)) <= cfg.tol_step * max(1.0, np.max(np.abs(x)))

        # components the full step sends to or below the floor are projected
        # onto it by the clamp, so only the rest limit the step
        lands = x + d > cfg.floor
        lam = boundary_step(x[lands], d[lands], cfg.theta_boundary)
        # at round-off a shorter step cannot help
        n_try = 1 if step_small else cfg.max_backtracks + 1
        for nb in range(n_try):
            trial = np.maximum(x + lam * d, cfg.floor)
            Rt, tnorm = evaluate(trial)
            if tnorm < rnorm:
                break
            lam *= cfg.backtrack_factor
        else:
            report.backtrack_counts.append(n_try - 1)
            if step_small:
                report.converged = True
                report.message = "stagnated at round-off"
            else:
                report.message = "backtracking stalled"
            return x, report

        report.backtrack_counts.append(nb)
        report.step_lengths.append(lam)
        x, R, rnorm = trial, Rt, tnorm
        report.residual_history.append(rnorm)


def jacobian_fd_check(residual, jacobian, x, n_dirs: int = 4, h=None, seed: int = 0) -> float:
    """Max relative gap between ``J(x) w`` and centered differences of ``residual``.

    Directions are random; the step is ``h = 1e-6 * max(1, |x|_inf)`` unless given
    and is shrunk so ``x +- h w`` stays positive.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    J = jacobian(x)
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))))
    worst = 0.0
    for _ in range(n_dirs):
        w = rng.standard_normal(x.shape)
        w /= np.max(np.abs(w))
        hh = min(h, 0.5 * float(np.min(x)))
        fd = (residual(x + hh * w) - residual(x - hh * w)) / (2 * hh)
        jw = J.matvec(w)
        scale = max(float(np.max(np.abs(jw))), float(np.max(np.abs(fd))), 1e-300)
        worst = max(worst, float(np.max(np.abs(jw - fd))) / scale)
    return worst
