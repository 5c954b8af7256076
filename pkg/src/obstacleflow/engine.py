"""Minimizing-movement time stepping for obstacle-constrained bending flows.

Each step minimizes

    Phi(u) = ||u - v||_H^2 / (2 tau) + E(u)    over   C = {u >= psi},

via a semismooth Newton iteration whose active set follows the primal-dual
rule; a projected-gradient descent acts as the globalization fallback.  The
accepted minimizer satisfies the discrete variational inequality

    (1/tau) (w - v, u - w)_H + dE(w)(u - w) >= 0   for all u in C,

which el_certificate re-checks against arbitrary admissible probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from .energy import EnergySpec, dual_vector, energy, h_gradient, hessian_band
from .gridspace import Grid, GridFunction, GridMismatchError, h_inner, h_norm, metric_for
from .obstacle import (Obstacle, SolverError, admissible, lower_bound_qp,
                       _banded_submatrix)

_MAX_NEWTON = 60
_MAX_FALLBACK = 4000
_SYM_TOL = 1e-13


class StepFailure(RuntimeError):
    """A minimizing-movement step could not be solved to tolerance."""

    def __init__(self, message, iterate=None, residual=None, partial=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.partial = partial


@dataclass(frozen=True)
class FlowConfig:
    """Everything one discrete trajectory depends on."""

    spec: EnergySpec
    psi: Obstacle
    u0: GridFunction
    tau: float
    T: float
    inner_tol: float = 1e-10
    max_steps: int | None = None
    seed: int = 0

    def validate(self) -> "FlowConfig":
        if self.u0.grid != self.psi.grid:
            raise GridMismatchError("initial datum and obstacle live on different grids")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ValueError(f"step size must be positive, got {self.tau!r}")
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError(f"final time must be positive, got {self.T!r}")
        if self.inner_tol <= 0.0:
            raise ValueError("inner tolerance must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not admissible(self.u0, self.psi):
            raise ValueError("initial datum is not admissible")
        return self

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def step_count(self) -> int:
        k = math.ceil(self.T / self.tau - 1e-9)
        if self.max_steps is not None:
            k = min(k, self.max_steps)
        return max(k, 0)


@dataclass(frozen=True)
class StepReport:
    """One accepted minimizing-movement step and its certificates."""

    w: GridFunction
    mu: np.ndarray               # nodal contact masses, zero off the active set
    el_residual: float           # variational-inequality pairing probed at v
    inner_iters: int
    energy_before: float
    energy_after: float
    step_norm: float             # ||w - v||_H
    kkt_residual: float          # dual-norm stationarity at acceptance
    dual: np.ndarray             # dE(w) as a load vector on interior nodes
    method: str = "newton"


@dataclass
class Trajectory:
    """Discrete flow u0 -> w_1 -> ... -> w_K with per-step reports."""

    spec: EnergySpec
    psi: Obstacle
    u0: GridFunction
    tau: float
    steps: list[StepReport] = field(default_factory=list)
    seed: int = 0
    inner_tol: float = 1e-10
    cache: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def iterate(self, k: int) -> GridFunction:
        """u_{k tau}: the initial datum for k = 0, else the k-th minimizer."""
        if k == 0:
            return self.u0
        return self.steps[k - 1].w

    def iterates(self) -> list[GridFunction]:
        return [self.u0] + [s.w for s in self.steps]

    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.steps) + 1)

    def energies(self) -> np.ndarray:
        if self.steps:
            first = self.steps[0].energy_before
        else:
            first = energy(self.spec, self.u0)
        return np.array([first] + [s.energy_after for s in self.steps])

    @property
    def final(self) -> GridFunction:
        return self.steps[-1].w if self.steps else self.u0


def _is_symmetric(values: np.ndarray) -> bool:
    scale = 1.0 + float(np.abs(values).max(initial=0.0))
    return float(np.abs(values - values[::-1]).max(initial=0.0)) <= _SYM_TOL * scale


def _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u_gf):
    """Residual F = A(u-v)/tau + dE(u), multiplier on the contact set, and
    the stationarity residual off it (dual norm)."""
    b = dual_vector(spec, u_gf)
    F = (metric.apply_hp(u_int - v_int) / np.longdouble(tau)).astype(float) + b
    on = u_int <= psi_int  # pinned nodes sit exactly on the obstacle
    mu = np.where(on, np.maximum(F, 0.0), 0.0)
    # off-contact stationarity plus any negative multiplier mass
    stat = metric.dual_norm(F - mu)
    return F, mu, stat, b


def _phi(spec, metric, v_int, tau, u_gf):
    d = u_gf.interior - v_int
    return float(metric.norm(d) ** 2 / (2.0 * tau) + energy(spec, u_gf))


def _stat_floor(n: int, u_sup: float, tau: float) -> float:
    """Representation floor for the stationarity residual.

    Storing the iterate in double precision perturbs each node by about
    eps * |u|, and the metric operator amplifies that by n^2 / tau in the
    dual norm; the constant covers the worst noise measured on elastic
    contact steps with a 2x margin.
    """
    eps = np.finfo(float).eps
    return 32.0 * eps * n * n * (1.0 + u_sup) * (1.0 + 1.0 / tau)


def _newton_step(metric, spec, tau, u_int, v_int, psi_int, F, active):
    """One semismooth Newton update on the pinned linear system."""
    m = u_int.size
    band = metric.ab / tau + hessian_band(spec, GridFunction.from_interior(metric.grid, u_int))
    delta = np.zeros(m)
    delta[active] = psi_int[active] - u_int[active]
    inactive = np.flatnonzero(~active)
    if inactive.size == 0:
        return delta
    rhs_full = -F - _band_matvec_full(band, delta)
    shift = 0.0
    while True:
        try:
            sub = _banded_submatrix(band, inactive)
            if shift:
                sub = sub.copy()
                sub += shift * _banded_submatrix(metric.ab, inactive)
            chol = cholesky_banded(sub, lower=False)
            break
        except np.linalg.LinAlgError:
            shift = 1e-4 if shift == 0.0 else shift * 100.0
            if shift > 1e6:
                raise
    delta[inactive] = cho_solve_banded((chol, False), rhs_full[inactive])
    return delta


def _band_matvec_full(band: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = band[2] * x
    if x.size >= 2:
        y[:-1] += band[1, 1:] * x[1:]
        y[1:] += band[1, 1:] * x[:-1]
    if x.size >= 3:
        y[:-2] += band[0, 2:] * x[2:]
        y[2:] += band[0, 2:] * x[:-2]
    return y


def _projected_descent(metric, spec, psi, v, tau, inner_tol, max_iters=_MAX_FALLBACK):
    """Globally convergent fallback: H-metric projected gradient with Armijo."""
    grid = v.grid
    psi_int = psi.interior
    v_int = v.interior
    u_int = np.maximum(v_int, psi_int)
    u_gf = GridFunction.from_interior(grid, u_int)
    phi_u = _phi(spec, metric, v_int, tau, u_gf)
    s = tau
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        b = dual_vector(spec, u_gf)
        grad = (u_int - v_int) / tau + metric.solve(b)
        target = u_int - s * grad
        try:
            u_try, _, _, _ = lower_bound_qp(metric, target, psi_int)
        except SolverError:
            # a wild trial target can defeat the projection solver; treat it
            # like a failed line-search step and shorten
            s *= 0.4
            if s < 1e-18:
                break
            continue
        u_try_gf = GridFunction.from_interior(grid, u_try)
        phi_try = _phi(spec, metric, v_int, tau, u_try_gf)
        move = metric.norm(u_try - u_int)
        if phi_try <= phi_u - 1e-4 * move**2 / max(s, 1e-300):
            u_int, u_gf, phi_u = u_try, u_try_gf, phi_try
            s *= 1.4
            F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u_gf)
            scale = 1.0 + metric.norm(u_int - v_int) / tau + metric.dual_norm(b)
            floor = _stat_floor(grid.n, float(np.abs(u_int).max(initial=0.0)), tau)
            if stat <= inner_tol * scale + floor and move <= 1e-8 * s * (1.0 + metric.norm(u_int)):
                return u_int, iters
        else:
            s *= 0.4
            if s < 1e-18:
                break
    return u_int, iters


def _pdas_solve(metric, spec, psi, v_int, tau, inner_tol, u_start, active,
                max_iters):
    """Primal-dual active set iteration from a given point and set estimate.

    Returns (u_int, u_gf, F, mu, stat, b, iters, converged).  Convergence
    means the active set repeated itself, the iterate is feasible, and the
    stationarity residual is below tolerance.
    """
    grid = metric.grid
    psi_int = psi.interior
    c_w = metric.pdas_weight / tau
    u_int = u_start
    u_gf = GridFunction.from_interior(grid, u_int)
    F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u_gf)
    best = (stat, 0)
    iters = 0
    converged = False
    for it in range(1, max_iters + 1):
        iters = it
        try:
            delta = _newton_step(metric, spec, tau, u_int, v_int, psi_int, F, active)
        except np.linalg.LinAlgError:
            break
        # trust safeguard against wild first steps
        norm_d = metric.norm(delta)
        cap = 10.0 * (1.0 + metric.norm(v_int))
        if norm_d > cap:
            delta *= cap / norm_d
        u_int = u_int + delta
        u_int[active] = psi_int[active]
        u_gf = GridFunction.from_interior(grid, u_int)
        F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u_gf)
        new_active = (mu + c_w * (psi_int - u_int)) > 0.0
        scale = 1.0 + metric.norm(u_int - v_int) / tau + metric.dual_norm(b)
        if stat < best[0]:
            best = (stat, it)
        stable = bool(np.array_equal(new_active, active))
        feasible = bool(np.all(u_int >= psi_int - 1e-12 * (1.0 + psi.sup_norm)))
        floor = _stat_floor(grid.n, float(np.abs(u_int).max(initial=0.0)), tau)
        if stable and feasible and stat <= inner_tol * scale + floor:
            converged = True
            break
        active = new_active
        if not np.isfinite(stat) or stat > 1e6 * (best[0] + 1.0):
            break
    return u_int, u_gf, F, mu, stat, b, iters, converged


def mm_step(spec: EnergySpec, psi: Obstacle, v: GridFunction, tau: float,
            inner_tol: float = 1e-10) -> StepReport:
    """One De Giorgi minimizing-movement step from v."""
    if v.grid != psi.grid:
        raise GridMismatchError("iterate and obstacle live on different grids")
    if not (tau > 0.0 and math.isfinite(tau)):
        raise ValueError(f"step size must be positive, got {tau!r}")
    if not admissible(v, psi):
        raise ValueError("mm_step requires an admissible starting point")

    grid = v.grid
    metric = metric_for(grid)
    psi_int = psi.interior
    v_int = v.interior
    energy_before = energy(spec, v)
    c_w = metric.pdas_weight / tau

    u_int = v_int.copy()
    u_gf = v
    F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u_gf)
    active = (v_int - psi_int <= psi.contact_tol) & (F > 0.0)
    method = "newton"
    u_int, u_gf, F, mu, stat, b, iters, converged = _pdas_solve(
        metric, spec, psi, v_int, tau, inner_tol, u_int, active, _MAX_NEWTON)

    phi_v = energy_before
    if converged:
        phi_w = _phi(spec, metric, v_int, tau, u_gf)
        if phi_w > phi_v + inner_tol * (1.0 + abs(phi_v)):
            converged = False

    if not converged:
        # the active-set iteration can cycle from a cold start on nonconvex
        # energies; fall back to a monotone first-order method, then polish
        # its (near-stationary) iterate with a warm restart of the Newton
        # loop, which converges once the contact set has settled
        method = "projected-descent"
        try:
            u_int, extra = _projected_descent(metric, spec, psi, v, tau, inner_tol)
        except SolverError as err:
            raise StepFailure(f"fallback solver failed: {err}", iterate=v,
                              residual=float("nan")) from err
        iters += extra
        u_gf = GridFunction.from_interior(grid, u_int)
        F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u_gf)
        active = (mu + c_w * (psi_int - u_int)) > 0.0
        p_int, p_gf, pF, pmu, pstat, pb, extra, polished = _pdas_solve(
            metric, spec, psi, v_int, tau, inner_tol, u_int.copy(), active, 40)
        iters += extra
        if polished and pstat < stat:
            phi_p = _phi(spec, metric, v_int, tau, p_gf)
            if phi_p <= phi_v + inner_tol * (1.0 + abs(phi_v)):
                u_int, u_gf, F, mu, stat, b = p_int, p_gf, pF, pmu, pstat, pb
        scale = 1.0 + metric.norm(u_int - v_int) / tau + metric.dual_norm(b)
        floor = _stat_floor(grid.n, float(np.abs(u_int).max(initial=0.0)), tau)
        phi_w = _phi(spec, metric, v_int, tau, u_gf)
        if stat > inner_tol * scale + floor or phi_w > phi_v + inner_tol * (1.0 + abs(phi_v)):
            raise StepFailure(
                f"step solver stalled: stationarity {stat:.3e} vs tolerance "
                f"{inner_tol * scale + floor:.3e}",
                iterate=u_gf, residual=stat,
            )

    # reflection is an isometry of both the metric and the energy, so for
    # symmetric data the exact minimizer is symmetric; recenter the iterate
    # and re-verify rather than letting roundoff drift accumulate
    if _is_symmetric(psi.samples) and _is_symmetric(v.values):
        u_sym = 0.5 * (u_int + u_int[::-1])
        on = u_sym - psi_int <= 1e-13 * (1.0 + psi.sup_norm)
        u_sym = np.where(on, psi_int, u_sym)
        if np.all(u_sym >= psi_int - 1e-12 * (1.0 + psi.sup_norm)):
            sym_gf = GridFunction.from_interior(grid, u_sym)
            F2, mu2, stat2, b2 = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_sym, sym_gf)
            scale2 = 1.0 + metric.norm(u_sym - v_int) / tau + metric.dual_norm(b2)
            phi2 = _phi(spec, metric, v_int, tau, sym_gf)
            floor2 = _stat_floor(grid.n, float(np.abs(u_sym).max(initial=0.0)), tau)
            if stat2 <= inner_tol * scale2 + floor2 and phi2 <= phi_v + inner_tol * (1.0 + abs(phi_v)):
                u_int, u_gf, F, mu, stat, b = u_sym, sym_gf, F2, mu2, stat2, b2

    mu_full = np.zeros(grid.n + 1)
    mu_full[1:-1] = mu
    step_gf = GridFunction.from_interior(grid, u_int - v_int)
    el_res = h_inner(step_gf, GridFunction(grid, v.values - u_gf.values)) / tau \
        + float(b @ (v_int - u_int))
    return StepReport(
        w=u_gf,
        mu=mu_full,
        el_residual=el_res,
        inner_iters=iters,
        energy_before=energy_before,
        energy_after=energy(spec, u_gf),
        step_norm=h_norm(step_gf),
        kkt_residual=stat,
        dual=b,
        method=method,
    )


def el_certificate(report: StepReport, v: GridFunction, tau: float, psi: Obstacle,
                   probes) -> float:
    """min over probes of the variational-inequality pairing at the step.

    Every probe must be admissible; a negative return beyond solver tolerance
    would falsify the step's minimality.
    """
    w = report.w
    vals = []
    for probe in probes:
        if probe.grid != w.grid:
            raise GridMismatchError("probe lives on a different grid")
        if not admissible(probe, psi):
            raise ValueError("el_certificate requires admissible probes")
        diff = GridFunction(w.grid, probe.values - w.values)
        pairing = h_inner(GridFunction(w.grid, w.values - v.values), diff) / tau \
            + float(report.dual @ diff.interior)
        vals.append(pairing)
    if not vals:
        raise ValueError("el_certificate needs at least one probe")
    return min(vals)


def run_flow(config: FlowConfig) -> Trajectory:
    """Iterate mm_step until k*tau >= T (or max_steps) from config.u0."""
    config.validate()
    traj = Trajectory(spec=config.spec, psi=config.psi, u0=config.u0,
                      tau=config.tau, seed=config.seed,
                      inner_tol=config.inner_tol)
    v = config.u0
    for k in range(config.step_count()):
        try:
            report = mm_step(config.spec, config.psi, v, config.tau,
                             inner_tol=config.inner_tol)
        except StepFailure as fail:
            fail.partial = traj
            raise
        traj.steps.append(report)
        v = report.w
    return traj


def interpolate(traj: Trajectory, t: float, kind: str = "linear") -> GridFunction:
    """Piecewise-constant or piecewise-linear interpolant of the discrete flow."""
    K = len(traj.steps)
    tau = traj.tau
    t_max = K * tau
    if not 0.0 <= t <= t_max + 1e-12 * max(1.0, t_max):
        raise ValueError(f"time {t} outside [0, {t_max}]")
    t = min(t, t_max)
    j = min(int(math.floor(t / tau + 1e-12)), K)
    if kind == "constant":
        return traj.iterate(j)
    if kind != "linear":
        raise ValueError(f"unknown interpolation kind {kind!r}")
    if j >= K:
        return traj.iterate(K)
    theta = (t - j * tau) / tau
    a = traj.iterate(j).values
    b = traj.iterate(j + 1).values
    return GridFunction(traj.grid, (1.0 - theta) * a + theta * b)


def refine_tau_compare(config: FlowConfig, tau_list) -> np.ndarray:
    """sup_t ||u^{tau_j}(t) - u^{tau_{j+1}}(t)||_H for consecutive refinements.

    Each tau must divide T and the list must be non-increasing; the returned
    differences are expected to shrink as tau does.
    """
    taus = [float(t) for t in tau_list]
    if len(taus) < 2:
        raise ValueError("need at least two step sizes to compare")
    for a, b in zip(taus, taus[1:]):
        if b > a:
            raise ValueError("step sizes must be non-increasing")
    for t in taus:
        k = round(config.T / t)
        if k < 1 or abs(k * t - config.T) > 1e-9 * max(1.0, config.T):
            raise ValueError(f"step size {t} does not divide the horizon {config.T}")
    flows = [run_flow(replace(config, tau=t)) for t in taus]
    ts = np.linspace(0.0, config.T, 101)
    out = []
    for fa, fb in zip(flows, flows[1:]):
        sup = 0.0
        for t in ts:
            ua = interpolate(fa, t)
            ub = interpolate(fb, t)
            sup = max(sup, h_norm(GridFunction(fa.grid, ua.values - ub.values)))
        out.append(sup)
    return np.asarray(out)
