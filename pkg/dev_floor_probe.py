"""Measure the refinement floor on the failing near-identity projection."""
import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from obstacleflow.gridspace import Grid, GridFunction, metric_for, h_norm
from obstacleflow.energy import elastic_spec
from obstacleflow.obstacle import (cone_obstacle, project_C, SolverError,
                                   _banded_submatrix)
from obstacleflow.engine import FlowConfig, run_flow

g = Grid(256)
spec = elastic_spec()
psi = cone_obstacle(g, 1.0, 0.25)
metric = metric_for(g)
u0 = GridFunction.from_callable(g, lambda x: 0.32 * np.sin(np.pi * x))
traj = run_flow(FlowConfig(spec=spec, psi=psi, u0=u0, tau=0.005, T=1.0))
w = traj.iterate(len(traj.steps) // 2)

rng = np.random.default_rng(7)
fails = []
for trial in range(30):
    pert = 0.3 * np.sin(np.pi * g.nodes) * rng.standard_normal()
    pert[0] = 0.0
    pert[-1] = 0.0
    v = GridFunction(g, w.values + pert)
    try:
        project_C(v, psi)
    except SolverError as e:
        fails.append((trial, v, str(e)))
print("failing trials:", [(t, m) for t, _, m in fails])

from obstacleflow.obstacle import lower_bound_qp

if fails:
    _, v, _ = fails[0]
    target = v.interior
    lower = psi.interior
    At_hp = metric.apply_hp(target)
    print("violation depth:", float((lower - target).max()),
          "violated nodes:", int((target <= lower).sum()),
          "scale:", 1.0 + metric.norm(target))
    u_sol, mu_sol, its, res = lower_bound_qp(metric, target, lower)
    print("lower_bound_qp resid:", res, "iters:", its)
    act = u_sol <= lower + 1e-12 * (1.0 + np.abs(lower).max())
    print("converged-attempt active set size:", int(act.sum()))
    # re-solve on the fixed set with varying refinement passes
    for passes in (1, 2, 3, 4, 6, 8):
        inactive = np.flatnonzero(~act)
        u_new = np.where(act, lower, 0.0)
        sub = _banded_submatrix(metric.ab, inactive)
        chol = cholesky_banded(sub, lower=False)
        rhs = (At_hp - metric.apply_hp(u_new))[inactive].astype(float)
        u_new[inactive] = cho_solve_banded((chol, False), rhs)
        for _ in range(passes):
            r = (At_hp - metric.apply_hp(u_new))[inactive].astype(float)
            u_new[inactive] += cho_solve_banded((chol, False), r)
        w_res = (metric.apply_hp(u_new) - At_hp).astype(float)
        resid = metric.dual_norm(np.where(act, 0.0, w_res))
        print(f"  passes={passes}: resid={resid:.3e}")
