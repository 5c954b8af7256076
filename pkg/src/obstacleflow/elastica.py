"""Closed-form elastica profiles and the constants of the blow-up dichotomy.

Everything here reduces to the Gauss hypergeometric function at nonpositive
argument.  Two evaluation regimes are used: the direct series on (-1, 0]
and the Pfaff transform w = z/(z-1) (argument mapped into [1/2, 1)) for
z <= -1, always keeping the smaller upper parameter so the transformed
series converges at w -> 1.

The slope primitive

    G(z) = integral_0^z (1 + s^2)^{-5/4} ds = z * 2F1(1/2, 5/4; 3/2; -z^2)

saturates at +-c0/2 with c0 = sqrt(pi) Gamma(3/4) / Gamma(5/4); for
|z| > 8 it is evaluated through the saturation tail instead of the series.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gamma as _gamma

from .gridspace import GridFunction

_SERIES_TOL = 1.0e-13
_MAX_TERMS = 60_000_000
_CHUNK = 1 << 16
_TAIL_CROSSOVER = 8.0


class DomainError(ValueError):
    """Argument outside the invertible range."""


class ConvergenceError(ArithmeticError):
    """A hypergeometric series failed to converge within the term budget."""


def c0() -> float:
    """Total turning length 2 * integral_0^inf (1+s^2)^{-5/4} ds."""
    return float(np.sqrt(np.pi) * _gamma(0.75) / _gamma(1.25))


_C0 = c0()
_HALF_C0 = 0.5 * _C0


def _series_scalar(a: float, b: float, c: float, w: float) -> float:
    """Gauss series at argument w, |w| < 1, by chunked term recursion."""
    if w == 0.0:
        return 1.0
    total = 1.0
    t = 1.0
    k0 = 1
    while k0 < _MAX_TERMS:
        k = np.arange(k0, k0 + _CHUNK, dtype=float)
        ratios = w * (a + k - 1.0) * (b + k - 1.0) / ((c + k - 1.0) * k)
        terms = t * np.cumprod(ratios)
        total += float(terms.sum())
        t = float(terms[-1])
        k0 += _CHUNK
        if t == 0.0:
            return total
        # ratios approach w monotonically for our parameter sets, so the
        # tail is geometrically dominated by max(|last ratio|, |w|)
        r = max(abs(ratios[-1]), abs(w))
        if r < 1.0 and abs(t) * r / (1.0 - r) <= _SERIES_TOL * abs(total):
            return total
    raise ConvergenceError(
        f"hypergeometric series did not converge after {k0} terms (w={w!r})"
    )


def _series_array(a: float, b: float, c: float, w: np.ndarray,
                  max_iter: int = 200_000) -> np.ndarray:
    """Gauss series for an array of arguments in [0, 1), iterated jointly."""
    S = np.ones_like(w)
    t = np.ones_like(w)
    if w.size == 0:
        return S
    wmax = float(w.max())
    geo = wmax / (1.0 - wmax)
    for k in range(max_iter):
        t = t * w * ((a + k) * (b + k) / ((c + k) * (k + 1.0)))
        S += t
        if k >= 1 and float(np.abs(t).max()) * geo <= _SERIES_TOL * float(np.abs(S).min()):
            return S
    raise ConvergenceError(
        f"hypergeometric series did not converge after {max_iter} terms (wmax={wmax!r})"
    )


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """2F1(a, b; c; z) for z <= 0.

    Direct Gauss series on (-1, 0]; Pfaff transform for z <= -1, keeping the
    smaller of a, b so the transformed series converges at argument -> 1.
    """
    if c <= 0.0 and c == np.floor(c):
        raise ValueError(f"c must not be a nonpositive integer, got {c}")
    z = float(z)
    if z > 0.0:
        raise ValueError(f"argument must be <= 0, got {z}")
    if z == 0.0:
        return 1.0
    if z > -1.0:
        return _series_scalar(a, b, c, z)
    w = z / (z - 1.0)
    if a <= b:
        return (1.0 - z) ** (-a) * _series_scalar(a, c - b, c, w)
    return (1.0 - z) ** (-b) * _series_scalar(b, c - a, c, w)


def _g_tail(s: np.ndarray) -> np.ndarray:
    """c0/2 - G(1/s) for s = 1/z in (0, 1/8]: the saturation tail series.

    T(s) = sum_k binom(-5/4, k) s^{2k + 3/2} / (2k + 3/2), ratio <= s^2 <= 1/64.
    """
    s2 = s * s
    coeff = 1.0
    acc = np.full_like(s, 1.0 / 1.5)
    power = np.ones_like(s)
    for k in range(1, 30):
        coeff *= (-1.25 - (k - 1)) / k
        power = power * s2
        term = coeff * power / (2.0 * k + 1.5)
        acc += term
        if float(np.abs(term).max()) <= 1e-18 * float(np.abs(acc).min()):
            break
    return acc * s * np.sqrt(s)


def G(z):
    """Slope primitive integral_0^z (1+s^2)^{-5/4} ds; scalar or ndarray."""
    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    out = np.empty_like(z_arr)
    az = np.abs(z_arr)
    near = az <= _TAIL_CROSSOVER
    if near.any():
        zz = z_arr[near]
        z2 = zz * zz
        w = z2 / (1.0 + z2)
        out[near] = zz / np.sqrt(1.0 + z2) * _series_array(0.5, 0.25, 1.5, w)
    far = ~near
    if far.any():
        out[far] = np.sign(z_arr[far]) * (_HALF_C0 - _g_tail(1.0 / az[far]))
    if scalar:
        return float(out[0])
    return out


def G_prime(z):
    z_arr = np.asarray(z, dtype=float)
    return (1.0 + z_arr * z_arr) ** (-1.25)


def G_inv(y):
    """Inverse of G on (-c0/2, c0/2), by safeguarded vector Newton."""
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr).copy()
    if np.any(np.abs(y_arr) >= _HALF_C0):
        bad = y_arr[np.abs(y_arr) >= _HALF_C0][0]
        raise DomainError(f"|y| must be < c0/2 = {_HALF_C0:.12g}, got {bad!r}")
    sign = np.sign(y_arr)
    ay = np.abs(y_arr)

    lo = np.zeros_like(ay)
    # upper bracket from the saturation tail: c0/2 - G(z) ~ (2/3) z^{-3/2}
    gap = _HALF_C0 - ay
    hi = np.maximum(1.1 * ((2.0 / 3.0) / gap) ** (2.0 / 3.0) + 1.0, 2.0)
    for _ in range(60):
        bad = G(hi) < ay
        if not bad.any():
            break
        hi[bad] *= 2.0
    else:
        raise ConvergenceError("failed to bracket G_inv")

    x = np.minimum(np.maximum(ay * (1.0 + (5.0 / 12.0) * ay * ay), lo), hi)
    ftol = 1e-15 * (1.0 + ay)
    for _ in range(100):
        f = G(x) - ay
        done = np.abs(f) <= ftol
        if done.all():
            break
        below = f < 0.0
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        step = f * (1.0 + x * x) ** 1.25
        x_new = x - step
        inside = (x_new > lo) & (x_new < hi)
        x = np.where(inside, x_new, 0.5 * (lo + hi))
        if float((hi - lo).max()) <= 1e-15:
            break
    out = sign * x
    if scalar:
        return float(out[0])
    return out


def u_c(c: float, x):
    """Height profile of the critical curve with curvature parameter c in (0, c0).

    u_c'(x) = G^{-1}(c/2 - c x);  u_c(x) = (2/c) [ (1+g(x)^2)^{-1/4} - (1+g(0)^2)^{-1/4} ].
    """
    if not 0.0 < c < _C0:
        raise DomainError(f"curvature parameter must lie in (0, c0), got {c!r}")
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if np.any((x_arr < 0.0) | (x_arr > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    g = G_inv(0.5 * c - c * x_arr)
    g0 = G_inv(0.5 * c)
    vals = (2.0 / c) * ((1.0 + g * g) ** (-0.25) - (1.0 + g0 * g0) ** (-0.25))
    if scalar:
        return float(vals[0])
    return vals


def u_c_slope(c: float, x):
    """u_c'(x) = G^{-1}(c/2 - c x)."""
    if not 0.0 < c < _C0:
        raise DomainError(f"curvature parameter must lie in (0, c0), got {c!r}")
    x_arr = np.asarray(x, dtype=float)
    return G_inv(0.5 * c - c * x_arr)


def U0(x):
    """Pointwise limit of u_c as c -> c0: U0(x) = (2/c0)(1 + G^{-1}(c0/2 - c0 x)^2)^{-1/4}."""
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if np.any((x_arr < 0.0) | (x_arr > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    out = np.zeros_like(x_arr)
    inner = (x_arr > 0.0) & (x_arr < 1.0)
    if inner.any():
        g = G_inv(_HALF_C0 - _C0 * x_arr[inner])
        out[inner] = (2.0 / _C0) * (1.0 + g * g) ** (-0.25)
    if scalar:
        return float(out[0])
    return out


def sample_u_c(grid, c: float) -> GridFunction:
    vals = u_c(c, grid.nodes)
    vals = np.asarray(vals).copy()
    vals[0] = 0.0
    vals[-1] = 0.0
    return GridFunction(grid, vals)


def sample_U0(grid) -> GridFunction:
    return GridFunction(grid, U0(grid.nodes))


def midpoint_value(B: float) -> float:
    """Midpoint height of the tip-touching critical state with tip slope B."""
    if B <= 0.0:
        raise ValueError(f"B must be positive, got {B!r}")
    z = -B * B
    num = hyp2f1(1.0, 1.5, 1.75, z)
    den = hyp2f1(0.5, 1.0, 0.75, z)
    return (B / 3.0) * num / den


_MIDPOINT_CACHE: dict | None = None


def midpoint_sup(detail: bool = False):
    """sup_B of midpoint_value over B > 0, from a log-grid scan.

    The profile increases toward its supremum; when the scan argmax sits on
    the right edge of [1e-3, 1e3] the B -> infinity limit is recovered by
    1/B Richardson extrapolation from the last two scan points, otherwise a
    golden-section pass refines the interior maximum.
    """
    global _MIDPOINT_CACHE
    if _MIDPOINT_CACHE is None:
        Bs = np.logspace(-3.0, 3.0, 121)
        fs = np.array([midpoint_value(B) for B in Bs])
        monotone = bool(np.all(np.diff(fs) > -1e-14))
        j = int(np.argmax(fs))
        if j == len(Bs) - 1:
            r = Bs[-1] / Bs[-2]
            value = float(fs[-1] + (fs[-1] - fs[-2]) / (r - 1.0))
            value = max(value, float(fs[-1]))
            mode = "edge-extrapolated"
        elif j == 0:
            value = float(fs[0])
            mode = "left-edge"
        else:
            lo, hi = np.log(Bs[j - 1]), np.log(Bs[j + 1])
            invphi = (np.sqrt(5.0) - 1.0) / 2.0
            a_, b_ = lo, hi
            c_ = b_ - invphi * (b_ - a_)
            d_ = a_ + invphi * (b_ - a_)
            fc, fd = midpoint_value(np.exp(c_)), midpoint_value(np.exp(d_))
            for _ in range(80):
                if fc > fd:
                    b_, d_, fd = d_, c_, fc
                    c_ = b_ - invphi * (b_ - a_)
                    fc = midpoint_value(np.exp(c_))
                else:
                    a_, c_, fc = c_, d_, fd
                    d_ = a_ + invphi * (b_ - a_)
                    fd = midpoint_value(np.exp(d_))
            value = float(max(fc, fd, fs[j]))
            mode = "interior"
        _MIDPOINT_CACHE = {
            "value": value,
            "scan_max": float(fs[j]),
            "argmax_B": float(Bs[j]),
            "monotone": monotone,
            "mode": mode,
        }
    if detail:
        return dict(_MIDPOINT_CACHE)
    return _MIDPOINT_CACHE["value"]


def blowup_threshold() -> float:
    """Obstacle slopes above this force unbounded derivative growth.

    max of: G^{-1}(c0/sqrt(6)) (energy admissibility), 8/c0 (cone clearance
    of the critical limit), 4 * midpoint_sup (tip-touching states).
    """
    t1 = G_inv(_C0 / np.sqrt(6.0))
    t2 = 8.0 / _C0
    t3 = 4.0 * midpoint_sup()
    return float(max(t1, t2, t3))


def cone_energy_floor(A: float, a: float) -> float:
    """Energy lower bound for curves touching the cone(A, a) off-tip region."""
    if A <= 0.0:
        raise ValueError(f"cone slope must be positive, got {A!r}")
    if not 0.0 < a < 0.5:
        raise ValueError(f"cone inset must lie in (0, 1/2), got {a!r}")
    gA = G(A)
    return float(4.0 * gA * gA * min(1.0 / (2.0 * a), 1.0 / (1.0 - 2.0 * a)))


def critical_residual(u: GridFunction) -> float:
    """Deviation of u from the critical-curve ODE, as a sup over interior nodes.

    With v = D2u * (1 + p^2)^{-5/4} (the scaled curvature), critical curves
    make v constant; the residual is the sup deviation of the normalized
    derivative r = v' * (1 + p^2)^{-5/4} from its mean.
    """
    w = u.values
    h = u.grid.h
    p = (w[2:] - w[:-2]) / (2.0 * h)
    q = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (h * h)
    v = q * (1.0 + p * p) ** (-1.25)
    if float(np.abs(v).max()) <= 1e-12 * (1.0 + float(np.abs(q).max())):
        return 0.0
    vp = (v[2:] - v[:-2]) / (2.0 * h)
    r = vp * (1.0 + p[1:-1] * p[1:-1]) ** (-1.25)
    return float(np.abs(r - r.mean()).max())


def constants() -> dict[str, float]:
    """The named constants of the dichotomy, for reports and the CLI."""
    return {
        "c0": _C0,
        "half_c0": _HALF_C0,
        "two_over_c0": 2.0 / _C0,
        "eight_over_c0": 8.0 / _C0,
        "c0_squared": _C0 * _C0,
        "four_thirds_c0_squared": 4.0 * _C0 * _C0 / 3.0,
        "G_inv_c0_over_sqrt6": float(G_inv(_C0 / np.sqrt(6.0))),
        "midpoint_sup": midpoint_sup(),
        "blowup_threshold": blowup_threshold(),
    }
