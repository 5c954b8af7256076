"""Independent reference implementations used to pin expected values.

Everything here is deliberately built from different primitives than the
package: dense matrices instead of banded factorizations, exhaustive
enumeration instead of active-set iteration, mpmath special functions and
adaptive quadrature instead of the package's series.  Slow but trustworthy.
"""

from __future__ import annotations

import numpy as np
import mpmath as mp
from scipy.integrate import quad

from obstacleflow.energy import dual_vector, energy, hessian_band
from obstacleflow.gridspace import Grid, GridFunction

mp.mp.dps = 40


# ----------------------------------------------------------------------
# dense linear algebra


def dense_gram(grid: Grid) -> np.ndarray:
    """Gram matrix of the inner product h * sum D2u * D2v, column by column."""
    h = grid.h
    m = grid.n - 1
    D = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        z = np.concatenate(([0.0], e, [0.0]))
        D[:, j] = (z[:-2] - 2.0 * z[1:-1] + z[2:]) / h**2
    return h * (D.T @ D)


def dense_h_inner(u: GridFunction, v: GridFunction) -> float:
    """The H inner product from raw nodal values and a python loop."""
    h = u.grid.h
    total = 0.0
    uu, vv = u.values, v.values
    for j in range(1, u.grid.n):
        du = (uu[j + 1] - 2.0 * uu[j] + uu[j - 1]) / h**2
        dv = (vv[j + 1] - 2.0 * vv[j] + vv[j - 1]) / h**2
        total += du * dv
    return h * total


def dense_embedding_constant(grid: Grid) -> float:
    """Norm of u -> max_j |(u_{j+1}-u_j)/h| on the unit H-ball, densely.

    Each difference functional l_j has dual norm sqrt(b^T A^{-1} b); the
    embedding constant is the largest of them.
    """
    A = dense_gram(grid)
    Ainv = np.linalg.inv(A)
    m = grid.n - 1
    h = grid.h
    best = 0.0
    for j in range(grid.n):
        b = np.zeros(m)
        if 1 <= j + 1 <= m:
            b[j + 1 - 1] += 1.0 / h
        if 1 <= j <= m:
            b[j - 1] -= 1.0 / h
        best = max(best, float(b @ Ainv @ b))
    return float(np.sqrt(best))


# ----------------------------------------------------------------------
# random smooth test functions


def smooth(grid: Grid, rng, amp: float = 1.0, modes: int = 6) -> GridFunction:
    """Random sine series with 1/k^2 coefficient decay; zero endpoints."""
    c = rng.standard_normal(modes) / (1.0 + np.arange(modes)) ** 2

    def f(x):
        return amp * sum(ck * np.sin((k + 1) * np.pi * x)
                         for k, ck in enumerate(c))

    return GridFunction.from_callable(grid, f)


# ----------------------------------------------------------------------
# exhaustive constrained solvers (small grids only)


def oracle_project(v: GridFunction, psi) -> np.ndarray:
    """Projection onto {u >= psi} by enumerating every active subset."""
    grid = v.grid
    m = grid.n - 1
    if m > 12:
        raise ValueError("exhaustive oracle is for small grids")
    A = dense_gram(grid)
    t = v.interior
    lo = psi.interior
    best = None
    for mask in range(1 << m):
        S = np.array([(mask >> i) & 1 for i in range(m)], dtype=bool)
        I = ~S
        u = np.empty(m)
        u[S] = lo[S]
        if I.any():
            rhs = (A @ t - A[:, S] @ lo[S])[I]
            try:
                u[I] = np.linalg.solve(A[np.ix_(I, I)], rhs)
            except np.linalg.LinAlgError:
                continue
        mu = A @ (u - t)
        if np.any(u < lo - 1e-10):
            continue
        if np.any(mu[S] < -1e-10):
            continue
        val = 0.5 * (u - t) @ A @ (u - t)
        if best is None or val < best[0]:
            best = (val, u)
    if best is None:
        raise RuntimeError("no KKT-consistent face found")
    return best[1]


def _dense_hessian(spec, grid: Grid, u_int: np.ndarray) -> np.ndarray:
    gf = GridFunction.from_interior(grid, u_int)
    hb = hessian_band(spec, gf)
    m = u_int.size
    H = np.zeros((m, m))
    H += np.diag(hb[2])
    H += np.diag(hb[1, 1:], 1) + np.diag(hb[1, 1:], -1)
    H += np.diag(hb[0, 2:], 2) + np.diag(hb[0, 2:], -2)
    return H


def oracle_mm(spec, psi, v: GridFunction, tau: float) -> np.ndarray:
    """Constrained minimum of the proximal step objective over {u >= psi}.

    Enumerates every active subset, solves each pinned smooth problem by a
    damped dense Newton iteration, filters KKT consistency, and keeps the
    lowest objective.  The energy derivatives come from the package (they
    are pinned separately against finite differences); the constrained
    search itself is independent of the package solver.  Exhaustiveness
    assumes the proximal objective is convex, which holds for the small
    step sizes the randomized instances draw.
    """
    grid = v.grid
    m = grid.n - 1
    if m > 12:
        raise ValueError("exhaustive oracle is for small grids")
    A = dense_gram(grid)
    lo = psi.interior
    vi = v.interior

    def phi(u_int):
        d = u_int - vi
        gf = GridFunction.from_interior(grid, u_int)
        return 0.5 * (d @ A @ d) / tau + energy(spec, gf)

    def grad(u_int):
        gf = GridFunction.from_interior(grid, u_int)
        return A @ (u_int - vi) / tau + dual_vector(spec, gf)

    best = None
    for mask in range(1 << m):
        S = np.array([(mask >> i) & 1 for i in range(m)], dtype=bool)
        I = ~S
        u = np.empty(m)
        u[S] = lo[S]
        ok = True
        if I.any():
            x = vi[I].copy()
            for _ in range(400):
                u[I] = x
                F = grad(u)
                M = A / tau + _dense_hessian(spec, grid, u)
                try:
                    dx = np.linalg.solve(M[np.ix_(I, I)], -F[I])
                except np.linalg.LinAlgError:
                    ok = False
                    break
                if np.abs(dx).max() < 1e-14 * (1.0 + np.abs(x).max()):
                    break  # at the floor, nothing left to gain
                # damp the step until the face residual drops
                r0 = np.abs(F[I]).max()
                t = 1.0
                while t > 1e-10:
                    u[I] = x + t * dx
                    rt = np.abs(grad(u)[I]).max()
                    if np.isfinite(rt) and (rt < r0 or rt < 1e-12 * (1.0 + r0)):
                        break
                    t *= 0.5
                else:
                    ok = False
                    break
                x = x + t * dx
                if t * np.abs(dx).max() < 1e-13 * (1.0 + np.abs(x).max()):
                    break
            else:
                ok = False
            if ok and not np.isfinite(x).all():
                ok = False
            u[I] = x
        if not ok:
            continue
        F = grad(u)
        if np.any(u < lo - 1e-10):
            continue
        ftol = 1e-8 * (1.0 + np.abs(F).max())
        if S.any() and np.any(F[S] < -ftol):
            continue
        if I.any() and np.abs(F[I]).max() > ftol:
            continue
        val = phi(u)
        if best is None or val < best[0]:
            best = (val, u.copy())
    if best is None:
        raise RuntimeError("no KKT-consistent face found")
    return best[1]


# ----------------------------------------------------------------------
# special-function oracles


def quad_c0() -> float:
    """c0 = 2 * integral_0^inf (1+s^2)^(-5/4) ds by adaptive quadrature."""
    val, err = quad(lambda s: (1.0 + s * s) ** (-1.25), 0.0, np.inf,
                    epsabs=1e-13, epsrel=1e-13)
    assert err < 1e-11
    return 2.0 * val


def gamma_c0() -> float:
    """Closed form: c0 = sqrt(pi) * Gamma(3/4) / Gamma(5/4)."""
    v = mp.sqrt(mp.pi) * mp.gamma(mp.mpf(3) / 4) / mp.gamma(mp.mpf(5) / 4)
    return float(v)


def mp_G(z: float) -> float:
    """G(z) = integral_0^z (1+s^2)^(-5/4) ds at 40 digits."""
    return float(mp.quad(lambda s: (1 + s * s) ** mp.mpf("-1.25"), [0, z]))


def mp_G_inv(y: float) -> float:
    half = gamma_c0() / 2.0
    if abs(y) >= half:
        raise ValueError("G_inv argument out of range")
    if y == 0.0:
        return 0.0
    return float(mp.findroot(
        lambda z: mp.quad(lambda s: (1 + s * s) ** mp.mpf("-1.25"), [0, z]) - y,
        mp.mpf(y)))


def mp_hyp2f1(a: float, b: float, c: float, z: float) -> float:
    return float(mp.hyp2f1(a, b, c, z))


def mp_midpoint_value(B: float) -> float:
    z = -B * B
    num = mp.hyp2f1(1, mp.mpf(3) / 2, mp.mpf(7) / 4, z)
    den = mp.hyp2f1(mp.mpf(1) / 2, 1, mp.mpf(3) / 4, z)
    return float(mp.mpf(B) / 3 * num / den)


def mp_u_c(c: float, x: float) -> float:
    """u_c(x) from the closed form with mpmath G inversion."""
    g = mp_G_inv(0.5 * c - c * x)
    g0 = mp_G_inv(0.5 * c)
    return float((2.0 / c) * ((1 + g * g) ** (-0.25) - (1 + g0 * g0) ** (-0.25)))


def continuum_energy(c: float) -> float:
    """E(u_c) = integral_0^1 u_c''(x)^2 (1+u_c'(x)^2)^(-5/2) dx, by quadrature.

    Along u_c the slope is p(x) = G^{-1}(c/2 - c x), so p'(x) = -c / G'(p)
    with G'(p) = (1+p^2)^(-5/4); the curvature integrand collapses to
    c^2 (1+p^2)^(5/2) * (1+p^2)^(-5/2) = c^2.
    """
    return c * c


# ----------------------------------------------------------------------
# finite differences


def fd_variation(spec, u: GridFunction, phi: GridFunction,
                 eps: float = 1e-6) -> float:
    """Central difference of the energy along phi."""
    up = GridFunction(u.grid, u.values + eps * phi.values)
    um = GridFunction(u.grid, u.values - eps * phi.values)
    return (energy(spec, up) - energy(spec, um)) / (2.0 * eps)
