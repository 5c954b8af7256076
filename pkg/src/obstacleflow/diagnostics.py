"""Trajectory diagnostics.

Everything a finished flow can be interrogated for: dissipation accounting,
variational-inequality residuals, contact measures, boundary-condition and
regularity monitors, the energy-dissipation-equality residual, and the
classifier that sorts a run into subconvergent / vertical-blow-up / undecided.

All checks work on the discrete trajectory produced by the engine; tolerances
carry the solver tolerance and the time step explicitly so that refining
either tightens the checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridspace import GridFunction, first_diff_sup, h_inner, h_norm, metric_for
from .energy import gradient_norm_bound, h_gradient, pairwise_energy_bound
from .obstacle import (Obstacle, SolverError, active_set, hpr_pairing,
                       metric_slope, project_C)
from .engine import Trajectory, el_certificate, interpolate

# Classifier thresholds.  slope_tol is relative to the initial energy and is
# derived where used; these two are grid- and instance-independent.
DERIV_CAP = 50.0
GROWTH_FACTOR = 2.0

# One-sided curvature at the ends decays like c*h along discrete flows whose
# initial datum is boundary-compliant; c calibrated on n in {128,256,512}
# relaxation runs (max observed c*h ratio ~14, kept with > 3x margin).
NAVIER_CAL = 50.0

# The energy-dissipation-equality residual is a pair of Riemann sums; its
# error is O(tau) with a constant tied to the initial energy, plus the solver
# tolerance amplified by 1/tau.  Calibrated on quadratic and elastic runs.
EDE_CAL = 10.0

_TS_COLUMNS = ("k", "t", "energy", "step_norm", "el_residual", "mu_mass",
               "slope", "sup_du", "sup_d3u", "navier0", "navier1",
               "symmetry_err")


@dataclass(frozen=True)
class ContactMeasure:
    """Nodal contact masses of one step, with suffix sums and the mass cap."""

    masses: np.ndarray      # nodal masses, >= 0, zero at the endpoints
    total_mass: float
    support: np.ndarray     # node indices carrying positive mass
    cumulative: np.ndarray  # cumulative[j] = mass carried by nodes j..n
    bound: float            # a-priori cap from the cutoff-pairing estimate


@dataclass(frozen=True)
class DichotomyVerdict:
    """Outcome of the subconvergence / blow-up classification."""

    tag: str                # subconvergent-candidate | vertical-blowup-candidate | undecided
    evidence: dict


def navier_check(u: GridFunction) -> tuple[float, float]:
    """One-sided second-order estimates of u'' at both endpoints."""
    w = u.values
    h2 = u.grid.h * u.grid.h
    b0 = (2.0 * w[0] - 5.0 * w[1] + 4.0 * w[2] - w[3]) / h2
    b1 = (2.0 * w[-1] - 5.0 * w[-2] + 4.0 * w[-3] - w[-4]) / h2
    return float(b0), float(b1)


def bc_tol(h: float) -> float:
    """Acceptance threshold for navier_check along flows: first order in h."""
    return NAVIER_CAL * float(h)


def third_diff_sup(u: GridFunction) -> float:
    """Sup of centered third difference quotients over the interior."""
    w = u.values
    h = u.grid.h
    t = (w[4:] - 2.0 * w[3:-1] + 2.0 * w[1:-3] - w[:-4]) / (2.0 * h ** 3)
    return float(np.abs(t).max()) if t.size else 0.0


def symmetry_error(u: GridFunction) -> float:
    """Sup deviation of u from its reflection about x = 1/2."""
    w = u.values
    return float(np.abs(w - w[::-1]).max())


def _smooth_noise(grid, rng, modes: int = 12, amp: float = 1.0) -> np.ndarray:
    """Random smooth nodal profile (Fourier modes with 1/m^2 decay)."""
    x = grid.nodes
    out = np.zeros_like(x)
    coef = rng.standard_normal(modes)
    for m in range(1, modes + 1):
        out += coef[m - 1] / (m * m) * np.sin(m * np.pi * x)
    out[0] = 0.0
    out[-1] = 0.0
    return amp * out


def _slopes(traj: Trajectory, psi: Obstacle | None = None) -> np.ndarray:
    """Metric slope at every recorded iterate, cached on the trajectory."""
    if psi is None or psi is traj.psi:
        psi = traj.psi
        key = ("slopes", len(traj.steps))
        hit = traj.cache.get(key)
        if hit is not None:
            return hit
        vals = np.array([metric_slope(traj.spec, u, psi)
                         for u in traj.iterates()])
        traj.cache[key] = vals
        return vals
    return np.array([metric_slope(traj.spec, u, psi) for u in traj.iterates()])


def dissipation_report(traj: Trajectory) -> list[tuple[float, float, float]]:
    """Per-step (t, energy, backward energy rate), with consistency checks.

    Asserts energy monotonicity within the solver tolerance and, when at
    least three energies are recorded, that the backward difference rate
    matches the squared discrete velocity up to 2*tol/tau + C*tau, where C
    is the observed second difference quotient of the energies.
    """
    if not traj.steps:
        return []
    tau = traj.tau
    tol = traj.inner_tol
    E = traj.energies()
    scale = 1.0 + float(np.abs(E).max())
    rise = float(np.max(E[1:] - E[:-1]))
    if rise > tol * scale:
        raise ValueError(
            f"energy increased by {rise:.3e} along the flow "
            f"(tolerance {tol * scale:.3e})")
    rates = (E[:-1] - E[1:]) / tau
    if E.size >= 3:
        vel2 = np.array([(s.step_norm / tau) ** 2 for s in traj.steps])
        C = float(np.abs((E[2:] - 2.0 * E[1:-1] + E[:-2]) / tau ** 2).max())
        cap = 2.0 * tol / tau + C * tau + 1e-12 * scale / tau
        gap = float(np.abs(rates - vel2).max())
        if gap > cap:
            raise ValueError(
                f"dissipation rate mismatch {gap:.3e} exceeds {cap:.3e}")
    return [(float((k + 1) * tau), float(E[k + 1]), float(rates[k]))
            for k in range(len(traj.steps))]


def fvi_residual(traj: Trajectory, k: int, probes) -> float:
    """Min over probes of the flow variational inequality at step k.

    The inequality pairs the backward difference velocity with probe minus
    iterate in the H-metric and adds the first variation of the energy; for
    the exact minimizer it is nonnegative for every admissible probe.
    """
    if not 1 <= k <= len(traj.steps):
        raise IndexError(f"step {k} not recorded (have 1..{len(traj.steps)})")
    return el_certificate(traj.steps[k - 1], traj.iterate(k - 1), traj.tau,
                          traj.psi, probes)


def cutoff_eta(grid, delta: float) -> GridFunction:
    """Smoothstep cutoff equal to 1 on [delta, 1-delta], zero at the ends.

    The quintic ramp keeps the discrete H-norm stable under grid refinement
    (a clamped linear or quadratic ramp has a slope kink whose second
    difference quotient blows up like h**-1/2).
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"cutoff width must lie in (0, 1/2), got {delta!r}")

    def profile(x):
        s = np.clip(np.asarray(x) / delta, 0.0, 1.0)
        t = np.clip((1.0 - np.asarray(x)) / delta, 0.0, 1.0)
        ramp_s = s * s * s * (10.0 + s * (6.0 * s - 15.0))
        ramp_t = t * t * t * (10.0 + t * (6.0 * t - 15.0))
        return ramp_s * ramp_t

    return GridFunction.from_callable(grid, profile)


def extract_contact_measure(traj: Trajectory, k: int,
                            eta_delta: float = 0.125) -> ContactMeasure:
    """Contact measure of step k: KKT multiplier read as nodal masses.

    Checks that the support lies on the contact set and that the total mass
    obeys the cutoff-pairing cap 2 ||eta|| ((1 + 2.5 C_P) E(u0) + 1), with
    eta a smoothstep cutoff wide enough to cover the support.
    """
    if not 1 <= k <= len(traj.steps):
        raise IndexError(f"step {k} not recorded (have 1..{len(traj.steps)})")
    rep = traj.steps[k - 1]
    mu = np.array(rep.mu, dtype=float)
    if mu.min() < -traj.inner_tol:
        raise ValueError(f"negative contact mass {mu.min():.3e}")
    support = np.nonzero(mu > 0.0)[0]
    gaps = rep.w.values[support] - traj.psi.samples[support]
    if support.size and float(gaps.max()) > traj.psi.contact_tol:
        raise ValueError("contact mass carried off the contact set")
    total = float(mu.sum())
    cumulative = np.cumsum(mu[::-1])[::-1]

    grid = traj.grid
    delta = eta_delta
    if support.size:
        xs = grid.nodes[support]
        margin = float(min(xs.min(), 1.0 - xs.max()))
        delta = min(delta, max(margin, 2.0 * grid.h))
    eta = cutoff_eta(grid, delta)
    metric = metric_for(grid)
    E0 = float(traj.energies()[0])
    bound = 2.0 * h_norm(eta) * ((1.0 + 2.5 * metric.embedding_constant)
                                 * E0 + 1.0)
    if total > bound * (1.0 + 1e-9) + 1e-9:
        raise ValueError(
            f"contact mass {total:.6e} exceeds the a-priori cap {bound:.6e}")
    return ContactMeasure(masses=mu, total_mass=total, support=support,
                          cumulative=cumulative, bound=bound)


def ede_residual(traj: Trajectory, T: float) -> float:
    """Energy-dissipation-equality residual over [0, T]:

        E(u(T)) + 1/2 sum ||du/tau||^2 tau + 1/2 sum slope(u_k)^2 tau - E(u0)

    with both sums over steps up to T and the slope taken at the new iterate
    of each step.  O(tau) + O(tol/tau) for exact flows; zero for stationary
    trajectories up to the solver tolerance.
    """
    tau = traj.tau
    K = int(round(T / tau))
    if K < 0 or abs(K * tau - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"horizon {T!r} is not a multiple of tau = {tau!r}")
    if K > len(traj.steps):
        raise ValueError(f"horizon {T!r} exceeds the recorded {len(traj.steps)} steps")
    E = traj.energies()
    vel_sum = 0.5 * tau * sum((s.step_norm / tau) ** 2
                              for s in traj.steps[:K])
    full = traj.cache.get(("slopes", len(traj.steps)))
    if full is not None:
        prefix = np.asarray(full[1:K + 1])
    else:
        key = ("slope_prefix", K)
        prefix = traj.cache.get(key)
        if prefix is None:
            prefix = np.array([metric_slope(traj.spec, traj.iterate(k), traj.psi)
                               for k in range(1, K + 1)])
            traj.cache[key] = prefix
    slope_sum = 0.5 * tau * float(np.sum(prefix ** 2))
    return float(E[K] + vel_sum + slope_sum - E[0])


def gradient_distance_check(traj: Trajectory, k: int) -> tuple[float, float]:
    """Distance of the energy gradient to the admissible set, against the
    distance of the negative discrete velocity to the admissible set.

    Returns (lhs, rhs) and raises if lhs exceeds rhs beyond tolerance; the
    flow inequality puts the gradient no farther from the constraint set
    than the velocity.
    """
    if not 1 <= k <= len(traj.steps):
        raise IndexError(f"step {k} not recorded (have 1..{len(traj.steps)})")
    rep = traj.steps[k - 1]
    v = traj.iterate(k - 1)
    psi = traj.psi
    g = h_gradient(traj.spec, rep.w)
    lhs = h_norm(GridFunction(g.grid, g.values - project_C(g, psi).values))
    z = GridFunction(v.grid, (v.values - rep.w.values) / traj.tau)
    rhs = h_norm(GridFunction(z.grid, z.values - project_C(z, psi).values))
    tol = 1e-6 * (1.0 + rhs)
    if lhs > rhs + tol:
        raise ValueError(
            f"gradient sits {lhs:.6e} from the admissible set, velocity only "
            f"{rhs:.6e}")
    return float(lhs), float(rhs)


def classify(traj: Trajectory, psi: Obstacle, slope_tol: float | None = None,
             deriv_cap: float = DERIV_CAP, growth_factor: float = GROWTH_FACTOR,
             probes: int = 30, seed: int | None = None) -> DichotomyVerdict:
    """Sort a finished run into the subconvergence / blow-up dichotomy.

    Subconvergent-candidate: the final iterate's metric slope fell below
    slope_tol and the derivative sup stayed below deriv_cap throughout.
    Vertical-blowup-candidate: the derivative sup exceeded deriv_cap or grew
    by at least growth_factor over the run.  Otherwise undecided.

    The evidence dict records the observed extremes, trend ratios, and the
    critical-point pairing (gradient against admissible directions) at the
    final iterate.
    """
    if traj.spec.tag != "elastic":
        raise ValueError("classification is defined for the elastic energy")
    E = traj.energies()
    E0 = float(E[0])
    if slope_tol is None:
        slope_tol = 1e-4 * (1.0 + E0)
    sups = np.array([first_diff_sup(u) for u in traj.iterates()])
    # the metric slope costs a constrained projection per evaluation, so long
    # trajectories are sampled on a stride (the final iterate always exactly)
    K = len(traj.steps)
    stride = max(1, (K + 1) // 1200)
    idx = sorted(set(range(0, K + 1, stride)) | {K})
    full = traj.cache.get(("slopes", K)) if psi is traj.psi else None
    if full is not None:
        sampled = {k: float(full[k]) for k in idx}
    else:
        sampled = {k: metric_slope(traj.spec, traj.iterate(k), psi)
                   for k in idx}
    final_slope = float(sampled[K])
    max_sup = float(sups.max())
    growth = max_sup / max(float(sups[0]), 1e-300)
    if final_slope <= slope_tol and max_sup <= deriv_cap:
        tag = "subconvergent-candidate"
    elif max_sup > deriv_cap or growth >= growth_factor:
        tag = "vertical-blowup-candidate"
    else:
        tag = "undecided"

    # critical-point pairing at the final iterate, over admissible probes
    rng = np.random.default_rng(traj.seed if seed is None else seed)
    u = traj.final
    g = h_gradient(traj.spec, u)
    grid = traj.grid
    amp = 1.0 + h_norm(u)
    cands = [traj.u0, project_C(GridFunction(grid, np.zeros(grid.n + 1)), psi)]
    for j in range(max(probes - len(cands), 0)):
        size = amp * (0.1 + 0.9 * rng.random())
        raw = GridFunction(grid, _smooth_noise(grid, rng, amp=size)
                           + u.values)
        cands.append(project_C(raw, psi))
    raw_min = np.inf
    unit_min = np.inf
    for vc in cands:
        diff = GridFunction(grid, vc.values - u.values)
        pairing = h_inner(g, diff)
        raw_min = min(raw_min, pairing)
        dn = h_norm(diff)
        if dn > 1e-14 * amp:
            unit_min = min(unit_min, pairing / dn)
    evidence = {
        "min_slope": float(min(sampled.values())),
        "final_slope": final_slope,
        "slope_tol": float(slope_tol),
        "slope_sample_stride": int(stride),
        "max_first_diff_sup": max_sup,
        "initial_first_diff_sup": float(sups[0]),
        "final_first_diff_sup": float(sups[-1]),
        "sup_growth_ratio": float(growth),
        "deriv_cap": float(deriv_cap),
        "growth_factor": float(growth_factor),
        "critical_pairing_min": float(raw_min),
        "critical_pairing_unit_min": float(unit_min),
        "energy_initial": E0,
        "energy_final": float(E[-1]),
        "steps": int(len(traj.steps)),
    }
    return DichotomyVerdict(tag=tag, evidence=evidence)


def contact_trap_check(traj: Trajectory, delta: float) -> bool:
    """True iff every recorded iterate's contact set sits in [delta, 1-delta]."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"margin must lie in (0, 1/2), got {delta!r}")
    nodes = traj.grid.nodes
    for u in traj.iterates():
        act = active_set(u, traj.psi)
        if act.size:
            xs = nodes[act]
            if xs.min() < delta - 1e-12 or xs.max() > 1.0 - delta + 1e-12:
                return False
    return True


def timeseries(traj: Trajectory) -> dict[str, np.ndarray]:
    """Column arrays for the per-iterate time series (row 0 is the datum)."""
    K = len(traj.steps)
    its = traj.iterates()
    nav = np.array([navier_check(u) for u in its])
    cols = {
        "k": np.arange(K + 1, dtype=int),
        "t": traj.times(),
        "energy": traj.energies(),
        "step_norm": np.array([0.0] + [s.step_norm for s in traj.steps]),
        "el_residual": np.array([0.0] + [s.el_residual for s in traj.steps]),
        "mu_mass": np.array([0.0] + [float(s.mu.sum()) for s in traj.steps]),
        "slope": _slopes(traj),
        "sup_du": np.array([first_diff_sup(u) for u in its]),
        "sup_d3u": np.array([third_diff_sup(u) for u in its]),
        "navier0": nav[:, 0],
        "navier1": nav[:, 1],
        "symmetry_err": np.array([symmetry_error(u) for u in its]),
    }
    return cols


def _record(name, passed, lhs, rhs, tolerance, step_range):
    return {"name": str(name), "passed": bool(passed), "lhs": float(lhs),
            "rhs": float(rhs), "tolerance": float(tolerance),
            "step_range": [int(step_range[0]), int(step_range[1])]}


def diagnostics_report(traj: Trajectory, seed: int | None = None,
                       fvi_samples: int = 6, fvi_probes: int = 25,
                       holder_pairs: int = 100, hpr_pairs: int = 40,
                       gd_samples: int = 12) -> list[dict]:
    """Run every per-trajectory check and return one record per check.

    Records are dicts with keys name / passed / lhs / rhs / tolerance /
    step_range, ready for JSON serialization.  A record never raises; the
    caller decides what failures mean.
    """
    rng = np.random.default_rng(traj.seed if seed is None else seed)
    tau = traj.tau
    tol = traj.inner_tol
    K = len(traj.steps)
    E = traj.energies()
    E0 = float(E[0])
    scaleE = 1.0 + float(np.abs(E).max())
    its = traj.iterates()
    grid = traj.grid
    psi = traj.psi
    recs = []

    # energy monotone descent
    rise = float(np.max(E[1:] - E[:-1])) if K else 0.0
    recs.append(_record("energy_descent", rise <= tol * scaleE,
                        rise, 0.0, tol * scaleE, (1, K)))

    # telescoped dissipation against the total drop
    diss = sum(s.step_norm ** 2 for s in traj.steps) / (2.0 * tau) if K else 0.0
    cap = E0 - float(E.min()) + K * tol * scaleE
    recs.append(_record("telescoped_dissipation", diss <= cap + 1e-12 * scaleE,
                        diss, cap, 1e-12 * scaleE, (1, K)))

    # backward rate against squared velocity
    if K >= 2:
        rates = (E[:-1] - E[1:]) / tau
        vel2 = np.array([(s.step_norm / tau) ** 2 for s in traj.steps])
        C = float(np.abs((E[2:] - 2.0 * E[1:-1] + E[:-2]) / tau ** 2).max())
        cap = 2.0 * tol / tau + C * tau + 1e-12 * scaleE / tau
        gap = float(np.abs(rates - vel2).max())
        recs.append(_record("dissipation_rate", gap <= cap, gap, cap, 0.0,
                            (1, K)))

    # Hoelder continuity of the linear interpolant in sqrt(t - s)
    if K >= 1:
        budget = 2.0 * (E0 - float(E.min()) + K * tol * scaleE)
        worst = 0.0
        span = K * tau
        for _ in range(holder_pairs):
            t, s = sorted(rng.random(2) * span)
            if s - t < 1e-3 * tau:
                continue
            d = h_norm(GridFunction(grid,
                                    interpolate(traj, s).values
                                    - interpolate(traj, t).values))
            capp = np.sqrt(budget * (s - t + 2.0 * tau))
            worst = max(worst, d / max(capp, 1e-300))
        recs.append(_record("holder_bound", worst <= 1.0 + 1e-9,
                            worst, 1.0, 1e-9, (0, K)))

        # growth of the iterates from the datum
        worst = -np.inf
        for k in range(1, K + 1):
            drift = h_norm(GridFunction(grid, its[k].values - its[0].values))
            capk = np.sqrt(budget * k * tau)
            worst = max(worst, drift - capk)
        recs.append(_record("growth_bound", worst <= 1e-9 * (1.0 + np.sqrt(budget)),
                            worst, 0.0, 1e-9 * (1.0 + np.sqrt(budget)), (1, K)))

    # per-iterate gradient norm bound and pairwise energy bound
    worst_g = -np.inf
    worst_p = -np.inf
    for u in its:
        gb = gradient_norm_bound(traj.spec, u)
        worst_g = max(worst_g, gb.lhs - gb.rhs)
        pl, pr = pairwise_energy_bound(u, traj.spec)
        worst_p = max(worst_p, pl - pr)
    recs.append(_record("gradient_norm_bound",
                        worst_g <= 1e-9 * (1.0 + scaleE),
                        worst_g, 0.0, 1e-9 * (1.0 + scaleE), (0, K)))
    recs.append(_record("pairwise_energy_bound",
                        worst_p <= 1e-9 * (1.0 + scaleE),
                        worst_p, 0.0, 1e-9 * (1.0 + scaleE), (0, K)))

    if K:
        # contact mass cap and complementarity
        worst_mass = 0.0
        min_bound = np.inf
        mass_ok = True
        for k in range(1, K + 1):
            try:
                cm = extract_contact_measure(traj, k)
            except ValueError:
                mass_ok = False
                continue
            worst_mass = max(worst_mass, cm.total_mass)
            min_bound = min(min_bound, cm.bound)
        if not np.isfinite(min_bound):
            min_bound = 0.0
        recs.append(_record("contact_mass_bound",
                            mass_ok and worst_mass <= min_bound * (1 + 1e-9) + 1e-9,
                            worst_mass, min_bound, 1e-9, (1, K)))

        comp = max(float(np.max(s.mu * (s.w.values - psi.samples)))
                   for s in traj.steps)
        mu_max = max(float(s.mu.max()) for s in traj.steps)
        comp_tol = tol * (1.0 + mu_max) * (1.0 + psi.sup_norm)
        recs.append(_record("complementarity", comp <= comp_tol,
                            comp, 0.0, comp_tol, (1, K)))

        # per-step variational inequality at the previous iterate
        el_min = min(s.el_residual for s in traj.steps)
        el_scale = 1.0 + max(s.step_norm / tau for s in traj.steps) ** 2 * tau
        el_tol = max(1e-7, 10.0 * tol) * el_scale
        recs.append(_record("el_residual", el_min >= -el_tol,
                            el_min, 0.0, el_tol, (1, K)))

        # sampled flow variational inequality with random admissible probes
        ks = sorted(set(np.linspace(1, K, min(fvi_samples, K)).astype(int)))
        worst = np.inf
        for k in ks:
            w = traj.iterate(k)
            probes = [w, traj.iterate(k - 1)]
            for _ in range(fvi_probes):
                size = (0.1 + 0.9 * rng.random()) * (1.0 + h_norm(w))
                raw = GridFunction(grid, w.values
                                   + _smooth_noise(grid, rng, amp=size))
                probes.append(project_C(raw, psi))
            res = fvi_residual(traj, k, probes)
            scale_k = 1.0 + traj.steps[k - 1].step_norm / tau
            worst = min(worst, res / scale_k)
        fvi_tol = max(1e-6, 30.0 * tol)
        recs.append(_record("fvi_residual", worst >= -fvi_tol,
                            worst, 0.0, fvi_tol, (ks[0], ks[-1])))

        # gradient no farther from the admissible set than the velocity
        ks = sorted(set(np.linspace(1, K, min(gd_samples, K)).astype(int)))
        worst = -np.inf
        gd_ok = True
        for k in ks:
            try:
                lhs, rhs = gradient_distance_check(traj, k)
            except (ValueError, SolverError):
                gd_ok = False
                continue
            worst = max(worst, lhs - rhs)
        if not np.isfinite(worst):
            worst = 0.0
        recs.append(_record("gradient_distance", gd_ok,
                            worst, 0.0, 1e-6, (ks[0], ks[-1])))

        # energy-dissipation equality; the slope sum prices one constrained
        # projection per step, so very long runs are checked on a prefix
        K_e = min(K, 400)
        ede = ede_residual(traj, K_e * tau)
        ede_cap = EDE_CAL * (1.0 + abs(E0)) * (tau + tol / tau)
        recs.append(_record("ede_residual", abs(ede) <= ede_cap,
                            abs(ede), ede_cap, 0.0, (1, K_e)))

    # natural boundary conditions at both ends
    nav = max(max(abs(b) for b in navier_check(u)) for u in its)
    recs.append(_record("navier_bc", nav <= bc_tol(grid.h),
                        nav, bc_tol(grid.h), 0.0, (0, K)))

    # symmetry preservation (only meaningful for symmetric data)
    sym_data = (float(np.abs(traj.u0.values - traj.u0.values[::-1]).max())
                <= 1e-12 * (1.0 + float(np.abs(traj.u0.values).max()))
                and float(np.abs(psi.samples - psi.samples[::-1]).max())
                <= 1e-12 * (1.0 + psi.sup_norm))
    if sym_data:
        worst = max(symmetry_error(u) for u in its)
        recs.append(_record("symmetry", worst <= 1e-8, worst, 0.0, 1e-8,
                            (0, K)))

    # monotone pairing of projection residuals on random pairs
    worst = np.inf
    for _ in range(hpr_pairs):
        a = GridFunction(grid, _smooth_noise(grid, rng, amp=1.0 + psi.sup_norm))
        b = GridFunction(grid, _smooth_noise(grid, rng, amp=1.0 + psi.sup_norm))
        worst = min(worst, hpr_pairing(a, b, psi))
    recs.append(_record("hpr_pairing", worst >= -1e-9, worst, 0.0, 1e-9,
                        (0, K)))
    return recs
