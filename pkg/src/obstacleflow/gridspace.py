"""Uniform-grid model of the space H = W^{2,2}(0,1) cap W_0^{1,2}(0,1).

Functions live on the nodes x_i = i/n, i = 0..n, with u_0 = u_n = 0 pinned.
The inner product is the L^2 pairing of second differences,

    (u, v)_H = h * sum_{i=1}^{n-1} (D2 u)_i (D2 v)_i,

so the Gram matrix on the n-1 interior unknowns is A = h * D^T D with
D the Dirichlet second-difference matrix.  A is pentadiagonal and SPD;
all solves against it go through one banded Cholesky factorization per
grid, built once and cached.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import threading

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded


class GridMismatchError(ValueError):
    """Operands live on different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] into n cells, n >= 8."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise TypeError(f"grid size must be an integer, got {self.n!r}")
        if self.n < 8:
            raise ValueError(f"grid size must be >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, 1.0, self.n + 1)
        x.flags.writeable = False
        return x


class GridFunction:
    """Nodal values on a Grid with hard zero endpoint values."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (grid.n + 1,):
            raise ValueError(
                f"expected {grid.n + 1} nodal values, got shape {values.shape}"
            )
        if values[0] != 0.0 or values[-1] != 0.0:
            raise ValueError("endpoint values must be exactly zero")
        if not np.isfinite(values).all():
            raise ValueError("nodal values must be finite")
        object.__setattr__(self, "grid", grid)
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def from_interior(cls, grid: Grid, interior) -> "GridFunction":
        interior = np.asarray(interior, dtype=float)
        if interior.shape != (grid.n - 1,):
            raise ValueError(
                f"expected {grid.n - 1} interior values, got shape {interior.shape}"
            )
        full = np.zeros(grid.n + 1)
        full[1:-1] = interior
        return cls(grid, full)

    @classmethod
    def from_callable(cls, grid: Grid, f) -> "GridFunction":
        full = np.asarray(f(grid.nodes), dtype=float).copy()
        full[0] = 0.0
        full[-1] = 0.0
        return cls(grid, full)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def __repr__(self):
        return f"GridFunction(n={self.grid.n}, sup={np.abs(self.values).max():.3g})"


def _same_grid(u: GridFunction, v: GridFunction) -> Grid:
    if u.grid != v.grid:
        raise GridMismatchError(f"grids differ: n={u.grid.n} vs n={v.grid.n}")
    return u.grid


def second_diff(u: GridFunction) -> np.ndarray:
    """(D2 u)_i = (u_{i+1} - 2 u_i + u_{i-1}) / h^2 at the interior nodes."""
    w = u.values
    h2 = u.grid.h * u.grid.h
    return (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h2


def h_inner(u: GridFunction, v: GridFunction) -> float:
    grid = _same_grid(u, v)
    return grid.h * float(np.dot(second_diff(u), second_diff(v)))


def h_norm(u: GridFunction) -> float:
    return np.sqrt(max(h_inner(u, u), 0.0))


def first_diff_sup(u: GridFunction) -> float:
    """sup-norm of forward difference quotients; discrete carrier of ||u'||_inf."""
    w = u.values
    return float(np.abs(np.diff(w)).max()) / u.grid.h


def reflect(u: GridFunction) -> GridFunction:
    """Pullback under x -> 1 - x; an isometry of the space."""
    return GridFunction(u.grid, u.values[::-1].copy())


def _interior_second_diff(z: np.ndarray, h2) -> np.ndarray:
    # second differences of an interior-indexed vector, zero-extended at both ends
    out = np.empty_like(z)
    out[1:-1] = z[2:] - 2.0 * z[1:-1] + z[:-2]
    out[0] = z[1] - 2.0 * z[0]
    out[-1] = z[-2] - 2.0 * z[-1]
    return out / h2


class HMetric:
    """Gram matrix A = h * D^T D of a grid, with its banded Cholesky factor.

    Stores the upper-banded form used by scipy.linalg (ab[u + i - j, j]).
    Instances are built once per grid via metric_for() and shared read-only.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n = grid.n
        h = grid.h
        m = n - 1
        scale = 1.0 / h**3
        ab = np.zeros((3, m))
        ab[2, :] = 6.0 * scale
        ab[2, 0] = ab[2, -1] = 5.0 * scale
        ab[1, 1:] = -4.0 * scale
        ab[0, 2:] = 1.0 * scale
        self.ab = ab
        self.ab.flags.writeable = False
        self._chol = cholesky_banded(ab, lower=False)
        self._h2 = h * h
        self._h = h

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A @ x for interior vectors x of shape (m,) or (m, k)."""
        if x.ndim == 1:
            q = _interior_second_diff(x, self._h2)
            return self._h * _interior_second_diff(q, self._h2)
        out = np.empty_like(x)
        for j in range(x.shape[1]):
            out[:, j] = self.apply(x[:, j])
        return out

    def apply_hp(self, x: np.ndarray) -> np.ndarray:
        """A @ x via the stencil in extended precision.

        ||A|| grows like n^3, so float64 matvecs carry noise eps * ||A|| * ||x||
        that swamps KKT residuals on fine grids; residual evaluation and
        iterative refinement go through this path instead.
        """
        x = np.asarray(x, dtype=np.longdouble)
        q = _interior_second_diff(x, np.longdouble(self._h2))
        return np.longdouble(self._h) * _interior_second_diff(q, np.longdouble(self._h2))

    def solve(self, rhs: np.ndarray, refine: int = 2) -> np.ndarray:
        """A^{-1} rhs with mixed-precision refinement (rhs shape (m,) or (m, k))."""
        x = cho_solve_banded((self._chol, False), rhs)
        if x.ndim == 1:
            rhs_hp = np.asarray(rhs, dtype=np.longdouble)
            for _ in range(refine):
                r = rhs_hp - self.apply_hp(x)
                x = x + cho_solve_banded((self._chol, False), r.astype(float))
            return x
        for _ in range(refine):
            r = rhs - self.apply(x)
            x = x + cho_solve_banded((self._chol, False), r)
        return x

    def norm(self, x_interior: np.ndarray) -> float:
        q = _interior_second_diff(np.asarray(x_interior, dtype=float), self._h2)
        return float(np.sqrt(self._h * np.dot(q, q)))

    def dual_norm(self, b: np.ndarray) -> float:
        """||b||_{H'} = sqrt(b^T A^{-1} b) for a dual (load) vector b."""
        x = self.solve(b)
        return float(np.sqrt(max(np.dot(b, x), 0.0)))

    @property
    def pdas_weight(self) -> float:
        # complementarity weight on the scale of diag(A)
        return 6.0 / self._h**3

    @cached_property
    def embedding_constant(self) -> float:
        """Operator norm of u -> max_i |(u_{i+1} - u_i)/h| on the unit H-ball.

        Equals max_i ||l_i||_{H'} over the n difference functionals, each norm
        obtained from one banded solve against the Gram matrix.
        """
        n = self.grid.n
        h = self.grid.h
        m = n - 1
        best = 0.0
        chunk = 512
        for j0 in range(0, n, chunk):
            j1 = min(j0 + chunk, n)
            B = np.zeros((m, j1 - j0))
            for col, j in enumerate(range(j0, j1)):
                # l_j(u) = (u_{j+1} - u_j)/h with boundary values dropped
                if 1 <= j + 1 <= m:
                    B[j + 1 - 1, col] += 1.0 / h
                if 1 <= j <= m:
                    B[j - 1, col] -= 1.0 / h
            X = cho_solve_banded((self._chol, False), B)
            norms_sq = np.einsum("ij,ij->j", B, X)
            best = max(best, float(norms_sq.max()))
        return float(np.sqrt(best))


_METRIC_CACHE: dict[int, HMetric] = {}
_METRIC_LOCK = threading.Lock()


def metric_for(grid: Grid) -> HMetric:
    """Shared HMetric for a grid; factorizations are built once per grid."""
    got = _METRIC_CACHE.get(grid.n)
    if got is not None:
        return got
    with _METRIC_LOCK:
        got = _METRIC_CACHE.get(grid.n)
        if got is None:
            got = HMetric(grid)
            _METRIC_CACHE[grid.n] = got
    return got


def embedding_constant(grid: Grid) -> float:
    return metric_for(grid).embedding_constant


def riesz_representer(grid: Grid, b: np.ndarray) -> GridFunction:
    """Solve A g = b for a dual vector b on the interior nodes."""
    metric = metric_for(grid)
    b = np.asarray(b, dtype=float)
    g = metric.solve(b)
    return GridFunction.from_interior(grid, g)
