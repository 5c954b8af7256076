"""Discrete bending energies and their first/second variations.

The energy of a nodal function u is the collocated integral

    E_h(u) = h * sum_{i=1}^{n-1} [ G'(p_i)^2 q_i^2 + 2 K(p_i) ],

with p the centered first differences and q the second differences.  All
variational quantities (dual vector, Riesz gradient, Hessian bands) are exact
derivatives of this discrete functional, not discretizations of continuum
formulas, so finite-difference consistency holds to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import elastica
from .gridspace import (
    GridFunction,
    _same_grid,
    h_norm,
    metric_for,
)


class EnergyOverflowError(ArithmeticError):
    """The integrand became non-finite."""


@dataclass(frozen=True)
class EnergySpec:
    """Integrand data: slope primitive G and zero-order term K with derivatives."""

    tag: str
    G: Callable
    Gp: Callable
    Gpp: Callable
    Gppp: Callable
    K: Callable
    Kp: Callable
    Kpp: Callable


def elastic_spec() -> EnergySpec:
    """The bending energy integral u''^2 (1+u'^2)^{-5/2}."""
    return EnergySpec(
        tag="elastic",
        G=elastica.G,
        Gp=lambda z: (1.0 + z * z) ** (-1.25),
        Gpp=lambda z: -2.5 * z * (1.0 + z * z) ** (-2.25),
        Gppp=lambda z: (-2.5 + 11.25 * z * z / (1.0 + z * z)) * (1.0 + z * z) ** (-2.25),
        K=np.zeros_like,
        Kp=np.zeros_like,
        Kpp=np.zeros_like,
    )


def quadratic_test_spec() -> EnergySpec:
    """E(u) = ||u||_H^2; every step has the closed form w = v/(1+2 tau)."""
    return EnergySpec(
        tag="quadratic-test",
        G=lambda z: np.asarray(z, dtype=float),
        Gp=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        Gpp=np.zeros_like,
        Gppp=np.zeros_like,
        K=np.zeros_like,
        Kp=np.zeros_like,
        Kpp=np.zeros_like,
    )


def general_spec(G, Gp, Gpp, Gppp, K, Kp, Kpp, tag: str = "general") -> EnergySpec:
    return EnergySpec(tag=tag, G=G, Gp=Gp, Gpp=Gpp, Gppp=Gppp, K=K, Kp=Kp, Kpp=Kpp)


def _collocation(u: GridFunction):
    w = u.values
    h = u.grid.h
    p = (w[2:] - w[:-2]) / (2.0 * h)
    q = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (h * h)
    return p, q


def energy(spec: EnergySpec, u: GridFunction) -> float:
    p, q = _collocation(u)
    gp = spec.Gp(p)
    integrand = gp * gp * q * q + 2.0 * spec.K(p)
    if not np.isfinite(integrand).all():
        i = int(np.flatnonzero(~np.isfinite(integrand))[0]) + 1
        raise EnergyOverflowError(f"non-finite energy integrand at node {i}")
    return u.grid.h * float(integrand.sum())


def first_variation(spec: EnergySpec, u: GridFunction, phi: GridFunction,
                    form: str = "auto") -> float:
    """dE(u)(phi), the exact derivative of the discrete energy.

    form="general" uses the chain-rule coefficients from the spec callables;
    form="elastic" uses the equivalent scaled-curvature expression
    2 q q_phi (1+p^2)^{-5/2} - 5 q^2 p p_phi (1+p^2)^{-7/2}.
    """
    _same_grid(u, phi)
    if form == "auto":
        form = "elastic" if spec.tag == "elastic" else "general"
    p, q = _collocation(u)
    pphi, qphi = _collocation(phi)
    h = u.grid.h
    if form == "elastic":
        s = 1.0 + p * p
        val = 2.0 * q * qphi * s ** (-2.5) - 5.0 * q * q * p * pphi * s ** (-3.5)
    elif form == "general":
        gp = spec.Gp(p)
        val = (2.0 * gp * gp * q * qphi
               + (2.0 * gp * spec.Gpp(p) * q * q + 2.0 * spec.Kp(p)) * pphi)
    else:
        raise ValueError(f"unknown form {form!r}")
    return h * float(val.sum())


def dual_vector(spec: EnergySpec, u: GridFunction) -> np.ndarray:
    """Load vector b with b_j = dE(u)(e_j) on the interior nodes."""
    p, q = _collocation(u)
    h = u.grid.h
    gp = spec.Gp(p)
    a = 2.0 * gp * gp * q
    c = 2.0 * gp * spec.Gpp(p) * q * q + 2.0 * spec.Kp(p)
    a_pad = np.zeros(a.size + 2)
    a_pad[1:-1] = a
    c_pad = np.zeros(c.size + 2)
    c_pad[1:-1] = c
    second = (a_pad[2:] - 2.0 * a_pad[1:-1] + a_pad[:-2]) / (h * h)
    skew = (c_pad[:-2] - c_pad[2:]) / (2.0 * h)
    return h * (second + skew)


def h_gradient(spec: EnergySpec, u: GridFunction,
               return_residual: bool = False):
    """Riesz representative of dE(u): solve A g = b against the Gram matrix.

    The solve residual is measured in the norm of the space and must stay
    below 1e-10 relative to the gradient scale.
    """
    metric = metric_for(u.grid)
    b = dual_vector(spec, u)
    g = metric.solve(b, refine=1)
    r = b - metric.apply(g)
    residual = metric.dual_norm(r)
    scale = 1.0 + metric.norm(g)
    if residual > 1e-10 * scale:
        raise RuntimeError(
            f"Gram solve residual {residual:.3e} exceeds 1e-10 * {scale:.3e}"
        )
    grad = GridFunction.from_interior(u.grid, g)
    if return_residual:
        return grad, residual
    return grad


class GradientBound(NamedTuple):
    lhs: float
    rhs: float
    ok: bool


def gradient_norm_bound(spec: EnergySpec, u: GridFunction) -> GradientBound:
    """||grad E(u)|| <= (1 + 2.5 C_P) E(u) + 1, with the grid's embedding constant.

    Provable for the elastic integrand (|G'| <= 1 and |p|/(1+p^2) <= 1/2 make
    the discrete Cauchy-Schwarz chain go through verbatim).
    """
    metric = metric_for(u.grid)
    lhs = h_norm(h_gradient(spec, u))
    rhs = (1.0 + 2.5 * metric.embedding_constant) * energy(spec, u) + 1.0
    return GradientBound(lhs, rhs, lhs <= rhs * (1.0 + 1e-10) + 1e-10)


def zeta(spec: EnergySpec, r: float, embedding_const: float) -> float:
    """Lipschitz modulus of the H-gradient on the ball of radius r:

        ||grad E(u) - grad E(v)|| <= zeta(||u|| + ||v||) ||u - v||.

    Derivative sups are taken over [-C r, C r], C the embedding constant,
    by dense sampling.
    """
    if r < 0.0:
        raise ValueError(f"radius must be nonnegative, got {r!r}")
    cp = float(embedding_const)
    zs = np.linspace(-cp * r, cp * r, 10001)
    gp = np.abs(spec.Gp(zs))
    gpgpp = np.abs(spec.Gp(zs) * spec.Gpp(zs))
    kpp = np.abs(spec.Kpp(zs))
    curv = np.abs(spec.Gpp(zs) ** 2 + spec.Gp(zs) * spec.Gppp(zs))
    return float(
        2.0 * gp.max() ** 2
        + 2.0 * r * gpgpp.max()
        + 2.0 * cp * cp * kpp.max()
        + cp * cp * r * r * curv.max()
        + 3.0 * cp * r * gpgpp.max()
    )


def pairwise_energy_bound(u: GridFunction, spec: EnergySpec | None = None):
    """max over node pairs of (G(p_j) - G(p_i))^2 / |x_j - x_i| vs the energy.

    Returns (lhs, rhs).  For smooth admissible curves lhs <= rhs; the bound is
    the discrete carrier of the slope-variation estimate behind the energy
    floors.
    """
    if spec is None:
        spec = elastic_spec()
    p, _ = _collocation(u)
    Gv = np.asarray(spec.G(p), dtype=float)
    h = u.grid.h
    rng_G = float(Gv.max() - Gv.min())
    best = 0.0
    m = Gv.size
    for lag in range(1, m):
        cap = rng_G * rng_G / (lag * h)
        if cap <= best:
            break
        d = Gv[lag:] - Gv[:-lag]
        val = float((d * d).max()) / (lag * h)
        if val > best:
            best = val
    return best, energy(elastic_spec() if spec.tag == "elastic" else spec, u)


def hessian_band(spec: EnergySpec, u: GridFunction) -> np.ndarray:
    """Upper-banded (bandwidth 2) Hessian of the discrete energy at u.

    Returned in the scipy banded layout ab[2] = diagonal, ab[1,1:] = first
    superdiagonal, ab[0,2:] = second superdiagonal.
    """
    p, q = _collocation(u)
    h = u.grid.h
    gp = spec.Gp(p)
    gpp = spec.Gpp(p)
    Wq = 2.0 * gp * gp
    Wc = 4.0 * gp * gpp * q
    Wp = 2.0 * (gpp * gpp + gp * spec.Gppp(p)) * q * q + 2.0 * spec.Kpp(p)
    m = p.size

    def pad(w):
        out = np.zeros(m + 2)
        out[1:-1] = w
        return out

    Wq_, Wc_, Wp_ = pad(Wq), pad(Wc), pad(Wp)
    h2 = h * h
    h3 = h2 * h
    h4 = h2 * h2
    diag = ((Wq_[:-2] + 4.0 * Wq_[1:-1] + Wq_[2:]) / h4
            + (Wp_[:-2] + Wp_[2:]) / (4.0 * h2)
            + (Wc_[:-2] - Wc_[2:]) / h3)
    off1 = (-2.0 * (Wq_[1:-2] + Wq_[2:-1]) / h4
            + (Wc_[2:-1] - Wc_[1:-2]) / h3)
    off2 = Wq_[2:-2] / h4 - Wp_[2:-2] / (4.0 * h2)
    ab = np.zeros((3, m))
    ab[2, :] = h * diag
    ab[1, 1:] = h * off1
    ab[0, 2:] = h * off2
    return ab
