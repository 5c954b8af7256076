"""Prototype + calibrate the three experiment presets."""
import numpy as np
from scipy.linalg import solve_banded

from obstacleflow.gridspace import Grid, GridFunction, first_diff_sup, h_norm
from obstacleflow.energy import elastic_spec, energy
from obstacleflow.obstacle import cone_obstacle, constant_obstacle, active_set
from obstacleflow.engine import FlowConfig, run_flow
from obstacleflow.elastica import (sample_u_c, u_c, G_inv, c0, blowup_threshold,
                                   constants, sample_U0)
from obstacleflow.diagnostics import navier_check, classify, _slopes

spec = elastic_spec()
C0 = c0()
print("c0^2 =", C0 ** 2, " 4c0^2/3 =", 4 * C0 ** 2 / 3,
      " threshold =", blowup_threshold())


def smoothstep(y):
    y = np.clip(y, 0.0, 1.0)
    return y * y * y * (10.0 + y * (6.0 * y - 15.0))


def curvature_lift(grid, q):
    """Solve the Dirichlet second-difference system D2 u = q."""
    m = grid.n - 1
    h2 = grid.h * grid.h
    ab = np.zeros((3, m))
    ab[0, 1:] = 1.0 / h2
    ab[1, :] = -2.0 / h2
    ab[2, :-1] = 1.0 / h2
    u_int = solve_banded((1, 1), ab, q)
    return GridFunction.from_interior(grid, u_int)


def subconverge_u0(grid, cbar=2.0, lo=0.04, hi=0.12):
    """Curvature of u_cbar cut off near the ends, integrated back up."""
    x = grid.nodes
    uc = sample_u_c(grid, cbar).values
    q = (uc[2:] - 2.0 * uc[1:-1] + uc[:-2]) / (grid.h * grid.h)
    chi = smoothstep((x[1:-1] - lo) / (hi - lo)) * smoothstep(
        (1.0 - x[1:-1] - lo) / (hi - lo))
    return curvature_lift(grid, chi * q)


def blowup_u0(grid, A, w, clearance):
    """Symmetric ramp with one smooth top turn of width w, apex A/4 + clearance."""
    x = grid.nodes[1:-1]
    xi = (x - 0.5) / (w / 2.0)
    bump = np.where(np.abs(xi) <= 1.0, (1.0 - xi ** 2) ** 3, 0.0)
    u = curvature_lift(grid, -bump)
    apex = u.values[grid.n // 2]
    scale = (A / 4.0 + clearance) / apex
    return GridFunction(grid, scale * u.values)


# ---- subconverge construction ----------------------------------------------
for n in (256,):
    g = Grid(n)
    psi = cone_obstacle(g, 1.0, 0.25)
    u0 = subconverge_u0(g)
    E0 = energy(spec, u0)
    clear = float((u0.values - psi.samples).min())
    U0v = sample_U0(g).values
    print(f"subconverge n={n}: E(u0)={E0:.6f} (< {C0**2:.4f}?) "
          f"clearance={clear:.4f} navier={navier_check(u0)} "
          f"apex={u0.values[n // 2]:.4f} sym={np.abs(u0.values - u0.values[::-1]).max():.2e}")
    print("  psi < U0 pointwise:", bool((psi.samples < U0v).all()),
          " min gap:", float((U0v - psi.samples).min()))
    bound = G_inv(np.sqrt(E0) / 2.0) + 0.05
    print("  first_diff_sup(u0):", first_diff_sup(u0), " cap:", bound)

# flow: how long until slope <= 5e-4?
g = Grid(256)
psi = cone_obstacle(g, 1.0, 0.25)
u0 = subconverge_u0(g)
tau = 0.01
cfg = FlowConfig(spec=spec, psi=psi, u0=u0, tau=tau, T=8.0)
traj = run_flow(cfg)
slopes = _slopes(traj)
sups = np.array([first_diff_sup(u) for u in traj.iterates()])
E0 = energy(spec, u0)
cap = G_inv(np.sqrt(E0) / 2.0) + 0.05
tol_cls = 1e-4 * (1.0 + E0)
print("slope tol (classifier):", tol_cls)
for tmark in (0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0):
    k = int(round(tmark / tau))
    if k <= len(traj.steps):
        print(f"  t={tmark}: slope={slopes[k]:.3e} sup_du={sups[k]:.4f} "
              f"E={traj.energies()[k]:.6f} "
              f"contact={active_set(traj.iterate(k), psi).size}")
print("sup_du max over run:", sups.max(), " cap:", cap, " ok:", sups.max() <= cap)
kc = next((k for k in range(len(slopes)) if slopes[k] <= tol_cls), None)
print("first k with slope <= tol:", kc, "(t =", None if kc is None else kc * tau, ")")
verdict = classify(traj, psi)
print("verdict:", verdict.tag, " final_slope:", verdict.evidence["final_slope"],
      " mass at end:", traj.steps[-1].mu.sum())

# ---- blowup construction ---------------------------------------------------
A = 1.05 * blowup_threshold()
for w in (0.5, 0.55, 0.6, 0.7):
    u0b = blowup_u0(g, A, w, 0.02)
    psib = cone_obstacle(g, A, 0.25)
    E0b = energy(spec, u0b)
    clear = float((u0b.values - psib.samples).min())
    print(f"blowup w={w}: E(u0)={E0b:.4f} (< {4 * C0**2 / 3:.4f}?) "
          f"clearance={clear:.4f} sup_du={first_diff_sup(u0b):.4f} "
          f"navier={tuple(round(b, 8) for b in navier_check(u0b))}")
