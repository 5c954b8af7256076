"""The admissible set C = {u >= psi}: projections, HPR geometry, metric slope.

The nearest-point H-projection and the tangent-cone projection behind the
metric slope are bound-constrained quadratic programs over the Gram matrix,
solved by a primal-dual active-set iteration.  Index compression keeps every
reduced system inside bandwidth 2, so each iteration is one banded Cholesky
solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from .energy import EnergySpec, h_gradient
from .gridspace import Grid, GridFunction, GridMismatchError, h_norm, metric_for

_FEAS_TOL = 1e-12
_MAX_PDAS_ITERS = 100


class SolverError(RuntimeError):
    """Active-set iteration failed; carries the last iterate for inspection."""

    def __init__(self, message, iterate=None, iterations=None):
        super().__init__(message)
        self.iterate = iterate
        self.iterations = iterations


@dataclass(frozen=True)
class Obstacle:
    """Nodal lower bound psi with negative clearance at both ends."""

    grid: Grid
    samples: np.ndarray
    kind: str = "tabulated"
    params: tuple = ()

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=float)
        if samples.shape != (self.grid.n + 1,):
            raise ValueError(
                f"expected {self.grid.n + 1} obstacle samples, got {samples.shape}"
            )
        if not np.isfinite(samples).all():
            raise ValueError("obstacle samples must be finite")
        if samples[0] >= 0.0 or samples[-1] >= 0.0:
            raise ValueError("obstacle must be negative at both endpoints")
        if self.kind not in ("cone", "tabulated"):
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if self.kind == "cone":
            A, a = self.params
            x = self.grid.nodes
            want = np.where(x <= 0.5, A * (x - a), A * (1.0 - x - a))
            if not np.allclose(samples, want, rtol=0.0, atol=1e-12):
                raise ValueError("cone samples do not match the cone formula")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @cached_property
    def sup_norm(self) -> float:
        return float(np.abs(self.samples).max())

    @property
    def contact_tol(self) -> float:
        # below KKT residual scale, above arithmetic noise
        return 1e-8 * (1.0 + self.sup_norm)

    @property
    def interior(self) -> np.ndarray:
        return self.samples[1:-1]


def cone_obstacle(grid: Grid, A: float, a: float) -> Obstacle:
    if A <= 0.0:
        raise ValueError(f"cone slope must be positive, got {A!r}")
    if not 0.0 < a < 0.5:
        raise ValueError(f"cone inset must lie in (0, 1/2), got {a!r}")
    x = grid.nodes
    samples = np.where(x <= 0.5, A * (x - a), A * (1.0 - x - a))
    return Obstacle(grid, samples, kind="cone", params=(A, a))


def constant_obstacle(grid: Grid, level: float) -> Obstacle:
    if level >= 0.0:
        raise ValueError(f"constant obstacle level must be negative, got {level!r}")
    return Obstacle(grid, np.full(grid.n + 1, level), kind="tabulated")


def tabulated_obstacle(grid: Grid, xs, ys) -> Obstacle:
    """Resample a two-column (x, psi) table onto the grid by linear interpolation."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need matching 1-d x and psi columns with >= 2 rows")
    order = np.argsort(xs)
    samples = np.interp(grid.nodes, xs[order], ys[order])
    return Obstacle(grid, samples, kind="tabulated")


def _check_grid(u: GridFunction, psi: Obstacle):
    if u.grid != psi.grid:
        raise GridMismatchError(
            f"function grid n={u.grid.n} does not match obstacle grid n={psi.grid.n}"
        )


def admissible(u: GridFunction, psi: Obstacle) -> bool:
    _check_grid(u, psi)
    return bool(np.all(u.values >= psi.samples - _FEAS_TOL))


def active_set(u: GridFunction, psi: Obstacle) -> np.ndarray:
    """Interior indices (1-based node numbers) where u touches the obstacle."""
    _check_grid(u, psi)
    gap = u.interior - psi.interior
    return np.flatnonzero(gap <= psi.contact_tol) + 1


def _banded_submatrix(ab: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Rows/columns idx of the upper-banded matrix ab; stays within bandwidth 2."""
    k = idx.size
    sub = np.zeros((3, k))
    sub[2, :] = ab[2, idx]
    if k >= 2:
        gap = idx[1:] - idx[:-1]
        cols = idx[1:]
        vals = np.zeros(k - 1)
        for g in (1, 2):
            sel = gap == g
            if sel.any():
                vals[sel] = ab[2 - g, cols[sel]]
        sub[1, 1:] = vals
    if k >= 3:
        gap2 = idx[2:] - idx[:-2]
        sel = gap2 == 2
        if sel.any():
            sub[0, 2:][sel] = ab[0, idx[2:][sel]]
    return sub


def _banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = ab[2] * x
    if x.size >= 2:
        y[:-1] += ab[1, 1:] * x[1:]
        y[1:] += ab[1, 1:] * x[:-1]
    if x.size >= 3:
        y[:-2] += ab[0, 2:] * x[2:]
        y[2:] += ab[0, 2:] * x[:-2]
    return y


def _pdas_sweep(metric, target, lower_fill, bounded, At_hp, active, max_iters):
    """Primal-dual active-set iterations from a given starting set.

    Reduced solves use mixed-precision refinement so the returned
    stationarity residual sits at the extended-precision noise floor rather
    than the float64 one.  Returns (u, mu, iters, resid) on a stable set and
    None if the set did not stabilize within max_iters.
    """
    c_w = metric.pdas_weight
    u = None
    for it in range(1, max_iters + 1):
        inactive = np.flatnonzero(~active)
        u_new = np.where(active, lower_fill, 0.0)
        if inactive.size:
            sub = _banded_submatrix(metric.ab, inactive)
            chol = cholesky_banded(sub, lower=False)
            # with u_new zero on the inactive set, this is the reduced rhs
            rhs = (At_hp - metric.apply_hp(u_new))[inactive].astype(float)
            u_new[inactive] = cho_solve_banded((chol, False), rhs)
            for _ in range(2):
                r = (At_hp - metric.apply_hp(u_new))[inactive].astype(float)
                u_new[inactive] += cho_solve_banded((chol, False), r)
        w_res = (metric.apply_hp(u_new) - At_hp).astype(float)
        mu = np.where(active, w_res, 0.0)
        new_active = bounded & (mu + c_w * (lower_fill - u_new) > 0.0)
        u = u_new
        if np.array_equal(new_active, active):
            resid = metric.dual_norm(np.where(active, 0.0, w_res))
            return u, mu, it, resid
        active = new_active
    return None


def _interior_point_active_set(metric, target, lower_fill, bounded,
                               max_iters=80, gap_tol=1e-9):
    """Identify the optimal active set by primal-dual path following.

    The active-set sweep above can wander when started far from the solution
    (the Gram matrix of the bending metric is not an M-matrix, for which the
    sweep's global convergence theory is stated), so hard instances go
    through a short interior-point run whose final iterate seeds the sweep.
    """
    B = np.flatnonzero(bounded)
    u = target.copy()
    pad = 0.5 * (1.0 + np.abs(lower_fill[B]).max(initial=0.0))
    u[B] = np.maximum(target[B], lower_fill[B] + pad)
    s = u[B] - lower_fill[B]
    r0 = metric.apply(u - target)
    mu = 1.0 + np.maximum(r0[B], 0.0)
    c_w = metric.pdas_weight
    for it in range(max_iters):
        gap = float(mu @ s) / B.size
        r_d = (metric.apply_hp(u - target)).astype(float)
        r_d[B] -= mu
        sigma = 0.15
        d = np.zeros(u.size)
        d[B] = mu / s
        band = metric.ab.copy()
        band[2] += d
        chol = cholesky_banded(band, lower=False)
        rhs = -r_d
        rhs[B] += sigma * gap / s - mu
        du = cho_solve_banded((chol, False), rhs)
        ds = du[B]
        dmu = (sigma * gap - mu * s) / s - (mu / s) * ds
        alpha = 1.0
        neg = ds < 0
        if neg.any():
            alpha = min(alpha, 0.95 * float((-s[neg] / ds[neg]).min()))
        neg = dmu < 0
        if neg.any():
            alpha = min(alpha, 0.95 * float((-mu[neg] / dmu[neg]).min()))
        u = u + alpha * du
        s = s + alpha * ds
        mu = mu + alpha * dmu
        # the sweep's own rule, evaluated at the interior iterate
        if gap * c_w <= gap_tol * (1.0 + float(np.abs(mu).max())) ** 2:
            break
    active = np.zeros(u.size, dtype=bool)
    active[B] = mu > c_w * s
    return active


def lower_bound_qp(metric, target: np.ndarray, lower: np.ndarray,
                   max_iters: int = _MAX_PDAS_ITERS):
    """minimize ||u - target||_A^2 over {u >= lower} (entries may be -inf).

    Active-set iteration on the Gram system, seeded by an interior-point
    pass when the plain sweep fails to stabilize.  Returns
    (u, mu, iterations, stationarity residual in the dual norm).
    """
    m = target.size
    bounded = np.isfinite(lower)
    if not bounded.any():
        return target.copy(), np.zeros(m), 0, 0.0
    lower_fill = np.where(bounded, lower, 0.0)
    At_hp = metric.apply_hp(target)
    active = bounded & (target <= lower)
    spent = 30
    got = _pdas_sweep(metric, target, lower_fill, bounded, At_hp, active, 30)
    # progressively tighter interior-point passes re-seed the sweep until the
    # identified set is a fixed point
    for gap_tol, ipm_iters in ((1e-9, 80), (1e-12, 200), (1e-15, 400)):
        if got is not None:
            break
        active = _interior_point_active_set(metric, target, lower_fill, bounded,
                                            max_iters=ipm_iters, gap_tol=gap_tol)
        got = _pdas_sweep(metric, target, lower_fill, bounded, At_hp, active,
                          max_iters)
        spent += max_iters
    if got is not None:
        u, mu, it, resid = got
        return u, mu, spent - max_iters + it if spent > 30 else it, resid
    raise SolverError(
        f"active-set projection did not converge in {spent} iterations",
        iterate=target, iterations=spent,
    )


def project_C(v: GridFunction, psi: Obstacle) -> GridFunction:
    """Nearest-point projection onto C in the H-metric."""
    _check_grid(v, psi)
    metric = metric_for(v.grid)
    u, mu, iters, resid = lower_bound_qp(metric, v.interior, psi.interior)
    # the KKT residual is judged against the size of the data in the KKT
    # system; concentrated contact forces (tip contact on a tall obstacle
    # gives point multipliers ~40) raise the reachable floor accordingly
    scale = (1.0 + metric.norm(v.interior)
             + float(np.abs(mu).max(initial=0.0)))
    # extended-precision refinement bottoms out around eps_ld * cond(A),
    # which grows like n^4; keep the guard meaningful on fine grids
    # (measured floor at n = 256 is 3.2e-10 regardless of extra passes)
    floor = 4e-10 * (1.0 + float(np.abs(u).max(initial=0.0))) * (v.grid.n / 256.0) ** 5
    if resid > max(1e-10 * scale, floor):
        raise SolverError(
            f"projection KKT residual {resid:.3e} exceeds tolerance",
            iterate=u, iterations=iters,
        )
    return GridFunction.from_interior(v.grid, u)


def hpr_pairing(w1: GridFunction, w2: GridFunction, psi: Obstacle) -> float:
    from .gridspace import h_inner

    r1 = GridFunction(w1.grid, w1.values - project_C(w1, psi).values)
    r2 = GridFunction(w2.grid, w2.values - project_C(w2, psi).values)
    return h_inner(r1, r2)


def metric_slope(spec: EnergySpec, u: GridFunction, psi: Obstacle) -> float:
    """|dE|(u) = norm of the tangent-cone projection of -grad E(u).

    The tangent cone at u is {d : d_i >= 0 on the active set}; with no contact
    it is the whole space and the slope is the plain gradient norm.
    """
    _check_grid(u, psi)
    if not admissible(u, psi):
        raise ValueError("metric_slope requires an admissible point")
    grad = h_gradient(spec, u)
    act = active_set(u, psi)
    if act.size == 0:
        return h_norm(grad)
    metric = metric_for(u.grid)
    lower = np.full(u.grid.n - 1, -np.inf)
    lower[act - 1] = 0.0
    d, _, _, _ = lower_bound_qp(metric, -grad.interior, lower)
    return metric.norm(d)
