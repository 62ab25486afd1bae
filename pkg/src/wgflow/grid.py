"""Cell-centered tensor grids and the shared finite-difference operators.

Fields are plain flat ``numpy`` arrays of length ``grid.size``.  In 2D the
flattening is lexicographic with the x index fastest, so ``f.reshape(grid.shape)``
gives an array indexed ``[k, j]`` (row = y, column = x).

Face coefficients are a tuple with one array per physical axis ``(x[, y])``.
Each array lives in the grid layout with the face axis shortened by one for
Neumann grids (interior faces only) and kept at length M for periodic grids,
where the last face wraps around to the first cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEUMANN = "neumann"
PERIODIC = "periodic"
_BCS = (NEUMANN, PERIODIC)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a segment or a square."""

    dim: int
    cells: int
    spacing: float
    origin: tuple[float, ...]
    bc: str = NEUMANN

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def size(self) -> int:
        return self.cells**self.dim

    @property
    def extent(self) -> float:
        return self.spacing * self.cells

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return self.extent**self.dim

    def axis_centers(self, axis: int = 0) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.cells) + 0.5) * self.spacing

    def coords(self) -> tuple[np.ndarray, ...]:
        """Flat cell-center coordinates ``(x,)`` or ``(x, y)`` in field order."""
        if self.dim == 1:
            return (self.axis_centers(0),)
        y, x = np.meshgrid(self.axis_centers(1), self.axis_centers(0), indexing="ij")
        return (x.ravel(), y.ravel())

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(*coords)`` at cell centers, broadcasting constants."""
        values = np.asarray(func(*self.coords()), dtype=float)
        return np.broadcast_to(values, (self.size,)).copy()

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.size,):
            raise ValueError(f"{name} has shape {f.shape}, grid expects ({self.size},)")
        return f


def build_grid(dim, cells_per_axis, extent, origin=0.0, bc=NEUMANN) -> Grid:
    """Build a uniform grid with ``spacing = extent / cells_per_axis``.

    ``origin`` is the lower-left corner; a scalar is used for every axis.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    cells = int(cells_per_axis)
    if cells != cells_per_axis or cells < 2:
        raise ValueError(f"cells_per_axis must be an integer >= 2, got {cells_per_axis}")
    if not extent > 0:
        raise ValueError(f"extent must be positive, got {extent}")
    bc = bc.lower()
    if bc not in _BCS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    if np.ndim(origin) == 0:
        origin = (float(origin),) * dim
    origin = tuple(float(o) for o in origin)
    if len(origin) != dim:
        raise ValueError("origin must have one entry per axis")
    return Grid(dim=dim, cells=cells, spacing=float(extent) / cells, origin=origin, bc=bc)


def _array_axis(grid: Grid, axis: int) -> int:
    # physical axis 0 (x) is the last array axis
    return grid.dim - 1 - axis


def integrate(grid: Grid, f) -> float:
    """Midpoint quadrature ``dx^dim * sum(f)``."""
    return float(grid.cell_volume * np.sum(f))


def inner(grid: Grid, a, b) -> float:
    a = grid.check(a, "a")
    b = grid.check(b, "b")
    return float(grid.cell_volume * np.dot(a, b))


def face_average(grid: Grid, f) -> tuple[np.ndarray, ...]:
    """Arithmetic mean of the two cells adjacent to each face."""
    F = grid.check(f).reshape(grid.shape)
    faces = []
    for axis in range(grid.dim):
        ax = _array_axis(grid, axis)
        if grid.bc == PERIODIC:
            faces.append(0.5 * (F + np.roll(F, -1, axis=ax)))
        else:
            n = grid.cells
            lo = np.take(F, range(n - 1), axis=ax)
            hi = np.take(F, range(1, n), axis=ax)
            faces.append(0.5 * (lo + hi))
    return tuple(faces)


def weighted_divgrad(grid: Grid, m, u) -> np.ndarray:
    """Discrete ``div(m grad u)`` with zero boundary flux (Neumann) or wrapping.

    ``m`` holds face coefficients as returned by :func:`face_average`.
    """
    U = grid.check(u, "u").reshape(grid.shape)
    out = np.zeros(grid.shape)
    h2 = grid.spacing**2
    for axis in range(grid.dim):
        ax = _array_axis(grid, axis)
        if grid.bc == PERIODIC:
            flux = m[axis] * (np.roll(U, -1, axis=ax) - U) / h2
            out += flux - np.roll(flux, 1, axis=ax)
        else:
            flux = m[axis] * np.diff(U, axis=ax) / h2
            zero = np.zeros_like(np.take(flux, [0], axis=ax))
            out += np.concatenate([flux, zero], axis=ax)
            out -= np.concatenate([zero, flux], axis=ax)
    return out.ravel()


def face_pairs(grid: Grid, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices ``(p, q)`` of the cells on either side of each face of ``axis``.

    Ordered like ``face_average(...)[axis].ravel()``.
    """
    idx = np.arange(grid.size).reshape(grid.shape)
    ax = _array_axis(grid, axis)
    if grid.bc == PERIODIC:
        return idx.ravel(), np.roll(idx, -1, axis=ax).ravel()
    n = grid.cells
    p = np.take(idx, range(n - 1), axis=ax)
    q = np.take(idx, range(1, n), axis=ax)
    return p.ravel(), q.ravel()


def divgrad_bands(grid: Grid, m) -> dict[int, np.ndarray]:
    """Matrix of :func:`weighted_divgrad` as diagonals keyed by offset.

    Storage follows the column-indexed convention of ``scipy.sparse.dia_matrix``:
    ``bands[k][j] == A[j - k, j]``.
    """
    n = grid.size
    h2 = grid.spacing**2
    bands: dict[int, np.ndarray] = {0: np.zeros(n)}
    for axis in range(grid.dim):
        p, q = face_pairs(grid, axis)
        c = np.asarray(m[axis], dtype=float).ravel() / h2
        diag = bands[0]
        diag -= np.bincount(p, weights=c, minlength=n)
        diag -= np.bincount(q, weights=c, minlength=n)
        # group faces by offset; periodic wrap faces carry their own offset
        offsets = q - p
        for off in np.unique(offsets):
            sel = offsets == off
            upper = bands.setdefault(int(off), np.zeros(n))
            upper += np.bincount(q[sel], weights=c[sel], minlength=n)
            lower = bands.setdefault(int(-off), np.zeros(n))
            lower += np.bincount(p[sel], weights=c[sel], minlength=n)
    return bands
