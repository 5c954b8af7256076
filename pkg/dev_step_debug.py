"""Trace the failing contact-onset mm_step at n=256."""
import numpy as np

from obstacleflow.gridspace import Grid, GridFunction, metric_for, h_norm
from obstacleflow.energy import elastic_spec, energy, dual_vector, hessian_band
from obstacleflow.obstacle import (cone_obstacle, project_C, active_set,
                                   lower_bound_qp, _pdas_sweep,
                                   _interior_point_active_set, SolverError)
from obstacleflow.engine import (FlowConfig, run_flow, StepFailure,
                                 _kkt_pieces, _phi, _newton_step, _stat_floor)

g = Grid(256)
spec = elastic_spec()
psi = cone_obstacle(g, 1.0, 0.25)
metric = metric_for(g)
u0 = GridFunction.from_callable(g, lambda x: 0.32 * np.sin(np.pi * x))
tau = 0.005

from obstacleflow.engine import mm_step

v = u0
for k in range(1, 201):
    try:
        rep = mm_step(spec, psi, v, tau)
    except Exception as e:
        print(f"step {k} FAILED ({type(e).__name__}): {e}")
        break
    v = rep.w
    if k % 20 == 0 or rep.mu.sum() > 0:
        print(f"step {k}: E {rep.energy_after:.6f} mid {v.values[g.n//2]:.6f} "
              f"mu_mass {rep.mu.sum():.4e} method {rep.method}")
print("gap at failure start: min(u - psi) =", float((v.values - psi.samples).min()),
      " midpoint u:", v.values[g.n // 2])
print("active before failing step:", active_set(v, psi))

psi_int = psi.interior
v_int = v.interior.copy()
u_int = v_int.copy()
u = GridFunction.from_interior(g, u_int)

F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u)
scale = 1.0 + metric.norm((u_int - v_int) / tau) + metric.dual_norm(b)
print("initial stat:", stat, "scale:", scale)

active = (v_int - psi_int <= psi.contact_tol) & (F > 0.0)
print("initial newton active:", active.sum())

for it in range(25):
    delta = _newton_step(metric, spec, tau, u_int, v_int, psi_int, F, active)
    nd = metric.norm(delta)
    cap = 10.0 * (1.0 + metric.norm(v_int))
    if nd > cap:
        delta = delta * (cap / nd)
    u_int = u_int + delta
    u_int[active] = psi_int[active]
    u = GridFunction.from_interior(g, u_int)
    F, mu, stat, b = _kkt_pieces(metric, spec, psi_int, v_int, tau, u_int, u)
    w = metric.pdas_weight / tau
    new_active = (mu + w * (psi_int - u_int)) > 0.0
    feas = float((psi_int - u_int).max())
    print(f"  it {it}: |delta|_H {nd:.3e} stat {stat:.3e} "
          f"active {active.sum()} -> {new_active.sum()} feas viol {feas:.3e} "
          f"phi {_phi(spec, metric, v_int, tau, u):.10f}")
    if (new_active == active).all() and feas <= 1e-12 and stat <= 1e-10 * scale:
        print("  converged")
        break
    active = new_active

print("phi(v):", _phi(spec, metric, v_int, tau, v))

# the fallback's first projection target from v
grad_vec = dual_vector(spec, v)
grad = metric.solve(grad_vec)
target = v_int - tau * grad
print("fallback target: max (psi - target):", float((psi_int - target).max()))
try:
    uq, muq, it, res = lower_bound_qp(metric, target, psi_int)
    print("fallback projection ok: iters", it, "resid", res)
except SolverError as e:
    print("fallback projection FAILED:", e)
