"""Round 3: plateau-launch blowup profile, flow steepening, timing."""
import time
import numpy as np

from obstacleflow.gridspace import Grid, GridFunction, first_diff_sup
from obstacleflow.energy import elastic_spec, energy
from obstacleflow.obstacle import cone_obstacle, active_set
from obstacleflow.engine import FlowConfig, run_flow
from obstacleflow.elastica import G, G_inv, c0, blowup_threshold
from obstacleflow.diagnostics import navier_check, _slopes

spec = elastic_spec()
C0 = c0()
LIMIT = 4.0 * C0 ** 2 / 3.0


def _J_table(g_top, m=4097):
    sigma = np.linspace(0.0, 1.0, m)
    gam = g_top * (1.0 - (1.0 - sigma) ** 2)
    vals = G_inv(gam)
    steps = 0.5 * (vals[1:] + vals[:-1]) * np.diff(gam)
    J = np.concatenate(([0.0], np.cumsum(steps)))
    return gam, J


def launch_profile(grid, A, P, clearance, a=0.25):
    """Slope P plateau from the origin, then a constant-G-rate sweep to 0."""
    H = A / 4.0 + clearance
    gP = G(P)
    gam_t, J_t = _J_table(gP)
    Jr = J_t[-1] / gP
    ell = (H - 0.5 * Jr) / (P - Jr)
    if not 0.0 < ell < 0.5:
        raise ValueError(f"no feasible plateau for P={P}: ell={ell}")
    x = grid.nodes
    xh = np.minimum(x, 1.0 - x)
    u = np.where(xh <= ell, P * xh, 0.0)
    cap = xh > ell
    gam_x = gP * (1.0 - (xh[cap] - ell) / (0.5 - ell))
    Jx = np.interp(gam_x, gam_t, J_t)
    u[cap] = P * ell + (0.5 - ell) / gP * (J_t[-1] - Jx)
    u[0] = 0.0
    u[-1] = 0.0
    u = 0.5 * (u + u[::-1])
    return GridFunction(grid, u), ell


if __name__ == "__main__":
    g = Grid(256)
    A = 1.05 * blowup_threshold()
    psi = cone_obstacle(g, A, 0.25)
    print(f"A={A:.6f} apex={A/4:.6f} limit={LIMIT:.4f}")
    for P in (3.5, 4.0, 4.5, 5.0, 6.0, 8.0):
        u0, ell = launch_profile(g, A, P, 0.02)
        E0 = energy(spec, u0)
        gap = u0.values - psi.samples
        print(f"  P={P}: ell={ell:.4f} E={E0:.4f} margin={(1-E0/LIMIT)*100:.1f}% "
              f"clear={gap.min():.4f}@x={g.nodes[gap.argmin()]:.3f} "
              f"sup_du={first_diff_sup(u0):.4f} navier={tuple(round(b,8) for b in navier_check(u0))}")

    # flow steepening at P=5
    P = 5.0
    u0, _ = launch_profile(g, A, P, 0.02)
    t0 = time.perf_counter()
    traj = run_flow(FlowConfig(spec=spec, psi=psi, u0=u0, tau=0.005, T=1.0))
    dt = time.perf_counter() - t0
    sups = np.array([first_diff_sup(u) for u in traj.iterates()])
    print(f"blowup flow P=5 tau=0.005 T=1: {dt:.1f}s ({dt/len(traj.steps)*1e3:.0f} ms/step)")
    for k in range(0, len(traj.steps) + 1, 20):
        print(f"  t={k*0.005:.2f} sup_du={sups[k]:.3f} E={traj.energies()[k]:.4f} "
              f"contact={active_set(traj.iterate(k), psi).size}")
    print("max sup_du:", sups.max(), " growth:", sups.max() / sups[0])
    sl = _slopes(traj)
    print("final slope:", sl[-1])
