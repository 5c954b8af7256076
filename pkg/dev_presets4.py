"""Round 4: post-contact steepening rate for the blowup preset."""
import time
import numpy as np

from obstacleflow.gridspace import Grid, first_diff_sup
from obstacleflow.energy import elastic_spec, energy
from obstacleflow.obstacle import cone_obstacle, active_set
from obstacleflow.engine import FlowConfig, run_flow
from obstacleflow.elastica import blowup_threshold, c0
from obstacleflow.diagnostics import _slopes
from dev_presets3 import launch_profile

spec = elastic_spec()
g = Grid(256)
A = 1.05 * blowup_threshold()
psi = cone_obstacle(g, A, 0.25)

P = 4.5
u0, ell = launch_profile(g, A, P, 0.003)
E0 = energy(spec, u0)
print(f"P={P} clearance=0.003 E0={E0:.4f} (limit {4*c0()**2/3:.4f})")

tau = 0.05
t0 = time.perf_counter()
traj = run_flow(FlowConfig(spec=spec, psi=psi, u0=u0, tau=tau, T=40.0))
dt = time.perf_counter() - t0
n_steps = len(traj.steps)
print(f"tau={tau} T=40: {dt:.1f}s total ({dt/n_steps*1e3:.0f} ms/step)")
sups = np.array([first_diff_sup(u) for u in traj.iterates()])
E = traj.energies()
sl = _slopes(traj)
for k in range(0, n_steps + 1, 40):
    print(f"  t={k*tau:5.1f} sup_du={sups[k]:.3f} E={E[k]:.4f} "
          f"slope={sl[k]:.4f} contact={active_set(traj.iterate(k), psi).size}")
print("max sup_du:", sups.max(), " growth:", sups.max() / sups[0],
      " argmax t:", sups.argmax() * tau)
print("final slope:", sl[-1], " min slope:", min(sl[1:]))
