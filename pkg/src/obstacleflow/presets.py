"""Named experiment presets that reproduce the flow dichotomy.

Each preset packages an obstacle, a compatible initial curve, and step/horizon
defaults calibrated at n = 256:

* ``subconverge``  -- a shallow cone under a curve built from the critical
  family; the flow settles onto the cone tip and relaxes to a constrained
  stationary state.
* ``blowup``       -- a cone whose tip sits higher than any constrained
  stationary curve can reach; the flow pins at the tip and steepens without
  bound instead of settling.
* ``unconstrained``-- an obstacle so low it never binds; plain elastic
  relaxation toward the zero curve.
* ``custom``       -- caller-supplied obstacle and initial curve.

Every construction is validated against its hypotheses at build time, and the
same checks are re-run when a preset is loaded from disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .elastica import G, G_inv, blowup_threshold, c0, sample_U0, sample_u_c
from .energy import EnergySpec, elastic_spec, energy
from .engine import FlowConfig
from .gridspace import Grid, GridFunction
from .obstacle import Obstacle, admissible, cone_obstacle, constant_obstacle

PRESET_NAMES = ("subconverge", "blowup", "unconstrained", "custom")

#: calibrated (tau, T, inner_tol) defaults per named preset
_DEFAULTS = {
    "subconverge": (0.05, 15.0, 1e-10),
    "blowup": (0.1, 4000.0, 3e-6),
    "unconstrained": (0.05, 12.0, 1e-10),
    "custom": (0.01, 1.0, 1e-10),
}

#: free parameters of the named constructions
SUBCONVERGE_CONE = (1.0, 0.25)
SUBCONVERGE_CBAR = 2.0
SUBCONVERGE_CUTOFF = (0.04, 0.12)
BLOWUP_MARGIN = 1.05
BLOWUP_INSET = 0.25
BLOWUP_LAUNCH_SLOPE = 4.0
BLOWUP_CLEARANCE = 0.003
UNCONSTRAINED_LEVEL = -1e6
UNCONSTRAINED_AMPLITUDE = 0.4


class PresetError(ValueError):
    """A preset's hypotheses failed; lists every violated condition."""

    def __init__(self, name, failures):
        self.preset = name
        self.failures = tuple(failures)
        lines = "; ".join(self.failures)
        super().__init__(f"preset {name!r} violates its hypotheses: {lines}")


@dataclass(frozen=True)
class ExperimentPreset:
    """A named, validated flow experiment and the verdict it should produce."""

    name: str
    config: FlowConfig
    expected_verdict: str

    def validate(self) -> "ExperimentPreset":
        check_preset(self)
        return self


def _smoothstep(y: np.ndarray) -> np.ndarray:
    """Quintic ramp: 0 below 0, 1 above 1, C^2 across both joints."""
    y = np.clip(y, 0.0, 1.0)
    return y * y * y * (10.0 + y * (6.0 * y - 15.0))


def _curvature_lift(grid: Grid, q: np.ndarray) -> GridFunction:
    """Integrate a nodal curvature field twice: D2 u = q, u(0) = u(1) = 0."""
    m = grid.n - 1
    h2 = grid.h * grid.h
    ab = np.zeros((3, m))
    ab[0, 1:] = 1.0 / h2
    ab[1, :] = -2.0 / h2
    ab[2, :-1] = 1.0 / h2
    return GridFunction.from_interior(grid, solve_banded((1, 1), ab, q))


def subconverge_initial(grid: Grid) -> GridFunction:
    """Critical-family curvature, cut off near the ends, integrated back up.

    Starting from the sampled critical curve u_cbar, its second difference is
    multiplied by a quintic cutoff that vanishes on [0, lo] and [1-lo, 1] and
    equals one on [hi, 1-hi].  Lifting the truncated curvature gives a curve
    with exactly linear tails, hence second differences that vanish at the
    ends identically, while keeping the midsection of the critical shape.
    """
    lo, hi = SUBCONVERGE_CUTOFF
    x = grid.nodes[1:-1]
    uc = sample_u_c(grid, SUBCONVERGE_CBAR).values
    q = (uc[2:] - 2.0 * uc[1:-1] + uc[:-2]) / (grid.h * grid.h)
    chi = _smoothstep((x - lo) / (hi - lo)) * _smoothstep((1.0 - x - lo) / (hi - lo))
    lifted = _curvature_lift(grid, chi * q)
    return GridFunction(grid, 0.5 * (lifted.values + lifted.values[::-1]))


def _g_inv_table(g_top: float, m: int = 4097):
    """Graded table of the running integral of G^{-1} on [0, g_top]."""
    sigma = np.linspace(0.0, 1.0, m)
    gam = g_top * (1.0 - (1.0 - sigma) ** 2)
    vals = G_inv(gam)
    steps = 0.5 * (vals[1:] + vals[:-1]) * np.diff(gam)
    running = np.concatenate(([0.0], np.cumsum(steps)))
    return gam, running


def launch_initial(grid: Grid, apex: float,
                   slope: float = BLOWUP_LAUNCH_SLOPE) -> GridFunction:
    """Steep symmetric arch: straight launch, then a constant-G-rate easing.

    The curve leaves each endpoint on a straight segment of the given slope,
    then turns over the top along the profile whose slope primitive G falls
    linearly in x.  That easing minimizes bending cost for the prescribed
    slope swing, so the whole arch reaches the requested apex with energy
    4 G(slope)^2 (slope - Jr) / (slope - 2 apex), where Jr is the mean of
    G^{-1} over the swing.  The plateau length is chosen so the apex lands
    exactly at the requested height.
    """
    g_top = G(slope)
    gam, running = _g_inv_table(g_top)
    j_mean = running[-1] / g_top
    ell = (apex - 0.5 * j_mean) / (slope - j_mean)
    if not 0.0 < ell < 0.5:
        raise ValueError(
            f"apex {apex!r} is unreachable with launch slope {slope!r}")
    x = grid.nodes
    xh = np.minimum(x, 1.0 - x)
    u = np.where(xh <= ell, slope * xh, 0.0)
    cap = xh > ell
    gam_x = g_top * (1.0 - (xh[cap] - ell) / (0.5 - ell))
    u[cap] = slope * ell + (0.5 - ell) / g_top * (running[-1] - np.interp(gam_x, gam, running))
    u[0] = 0.0
    u[-1] = 0.0
    return GridFunction(grid, 0.5 * (u + u[::-1]))


def unconstrained_initial(grid: Grid) -> GridFunction:
    vals = UNCONSTRAINED_AMPLITUDE * np.sin(np.pi * grid.nodes)
    vals[0] = 0.0
    vals[-1] = 0.0
    return GridFunction(grid, 0.5 * (vals + vals[::-1]))


def _symmetry_gap(values: np.ndarray) -> float:
    return float(np.abs(values - values[::-1]).max())


def _preset_failures(name: str, spec: EnergySpec, psi: Obstacle,
                     u0: GridFunction) -> list[str]:
    failures = []
    tol = 1e-10 * (1.0 + float(np.abs(u0.values).max()))
    if _symmetry_gap(u0.values) > tol:
        failures.append("initial curve is not symmetric about x = 1/2")
    if not admissible(u0, psi):
        failures.append("initial curve dips below the obstacle")
    if name == "subconverge":
        e0, cap = energy(spec, u0), c0() ** 2
        if not e0 < cap:
            failures.append(f"energy {e0:.6f} is not below c0^2 = {cap:.6f}")
        envelope = sample_U0(psi.grid).values
        if not (psi.samples < envelope).all():
            failures.append("obstacle is not strictly below the critical envelope U0")
    elif name == "blowup":
        e0, cap = energy(spec, u0), 4.0 * c0() ** 2 / 3.0
        if not e0 < cap:
            failures.append(f"energy {e0:.6f} is not below 4 c0^2 / 3 = {cap:.6f}")
        if psi.kind != "cone":
            failures.append("blowup preset requires a cone obstacle")
        else:
            slope_a, _ = psi.params
            if not slope_a > blowup_threshold():
                failures.append(
                    f"cone slope {slope_a:.6f} does not exceed the blow-up "
                    f"threshold {blowup_threshold():.6f}")
    return failures


def check_preset(preset: ExperimentPreset) -> None:
    """Re-run the hypothesis checks; raise PresetError on any violation."""
    if preset.name not in PRESET_NAMES:
        raise PresetError(preset.name, ["unknown preset name"])
    cfg = preset.config
    failures = _preset_failures(preset.name, cfg.spec, cfg.psi, cfg.u0)
    if failures:
        raise PresetError(preset.name, failures)


def build_preset(name: str, n: int = 256, tau: float | None = None,
                 T: float | None = None, seed: int = 0,
                 psi: Obstacle | None = None,
                 u0: GridFunction | None = None) -> ExperimentPreset:
    """Construct and validate a named preset on an n-point grid.

    tau and T default to per-preset calibrated values.  The custom preset
    requires both psi and u0; the named presets reject them.
    """
    if name not in PRESET_NAMES:
        raise PresetError(name, ["unknown preset name"])
    if name != "custom" and (psi is not None or u0 is not None):
        raise PresetError(name, ["psi/u0 overrides are only for the custom preset"])
    grid = Grid(n)
    spec = elastic_spec()
    tau_d, T_d, inner_tol = _DEFAULTS[name]
    tau = tau_d if tau is None else tau
    T = T_d if T is None else T

    if name == "subconverge":
        psi = cone_obstacle(grid, *SUBCONVERGE_CONE)
        u0 = subconverge_initial(grid)
        expected = "subconvergent-candidate"
    elif name == "blowup":
        cone_slope = BLOWUP_MARGIN * blowup_threshold()
        psi = cone_obstacle(grid, cone_slope, BLOWUP_INSET)
        u0 = launch_initial(grid, cone_slope * BLOWUP_INSET + BLOWUP_CLEARANCE)
        expected = "vertical-blowup-candidate"
    elif name == "unconstrained":
        psi = constant_obstacle(grid, UNCONSTRAINED_LEVEL)
        u0 = unconstrained_initial(grid)
        expected = "subconvergent-candidate"
    else:
        if psi is None or u0 is None:
            raise PresetError(name, ["custom preset needs both psi and u0"])
        expected = "undecided"

    config = FlowConfig(spec=spec, psi=psi, u0=u0, tau=tau, T=T,
                        inner_tol=inner_tol, seed=seed).validate()
    return ExperimentPreset(name=name, config=config,
                            expected_verdict=expected).validate()
