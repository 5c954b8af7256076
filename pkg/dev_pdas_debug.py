import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from obstacleflow.gridspace import Grid, GridFunction, metric_for
from obstacleflow.obstacle import cone_obstacle, _banded_submatrix

rng = np.random.default_rng(7)


def smooth(grid, rng, amp=1.0, modes=6):
    c = rng.standard_normal(modes) / (1 + np.arange(modes)) ** 2
    def f(x):
        return amp * sum(ck * np.sin((k + 1) * np.pi * x) for k, ck in enumerate(c))
    return GridFunction.from_callable(grid, f)


grid8 = Grid(8)
for _ in range(30):
    smooth(grid8, rng, amp=rng.uniform(0.2, 1.5), modes=6)
    rng.uniform(0.2, 1.5)  # burn to mirror dev script state loosely

grid = Grid(256)
psi = cone_obstacle(grid, 1.0, 0.25)
metric = metric_for(grid)

rng2 = np.random.default_rng(7)
# regenerate the first failing v1 exactly: replay dev_obstacle's draws
for trial in range(30):
    amp = rng2.uniform(0.2, 1.5)
    smooth(grid8, rng2, amp=amp, modes=6)
v1 = smooth(grid, rng2, amp=rng2.uniform(0.2, 2.0))

target = v1.interior
lower = psi.interior
m = target.size
bounded = np.isfinite(lower)
lower_fill = np.where(bounded, lower, 0.0)
At_hp = metric.apply_hp(target)
c_w = metric.pdas_weight
active = bounded & (target <= lower)
u = np.where(active, lower_fill, target)
prev_sets = {}
for it in range(1, 61):
    inactive = np.flatnonzero(~active)
    u_new = np.where(active, lower_fill, 0.0)
    if inactive.size:
        sub = _banded_submatrix(metric.ab, inactive)
        chol = cholesky_banded(sub, lower=False)
        rhs = (At_hp - metric.apply_hp(u_new))[inactive].astype(float)
        u_new[inactive] = cho_solve_banded((chol, False), rhs)
        for _ in range(2):
            r = (At_hp - metric.apply_hp(u_new))[inactive].astype(float)
            u_new[inactive] += cho_solve_banded((chol, False), r)
    w_res = (metric.apply_hp(u_new) - At_hp).astype(float)
    mu = np.where(active, w_res, 0.0)
    ind = mu + c_w * (lower_fill - u_new)
    new_active = bounded & (ind > 0.0)
    added = np.flatnonzero(new_active & ~active)
    removed = np.flatnonzero(active & ~new_active)
    key = new_active.tobytes()
    tag = prev_sets.get(key, "")
    infeas = float(np.maximum(lower_fill - u_new, 0.0)[bounded].max(initial=0.0))
    mu_min = float(mu[active].min(initial=0.0))
    # indicator values at flipping nodes
    flips = np.concatenate([added, removed])
    flipvals = ind[flips] if flips.size else np.array([])
    print(f"it {it:3d} |S|={active.sum():3d} -> {new_active.sum():3d} "
          f"+{added.size} -{removed.size} infeas={infeas:.2e} mu_min={mu_min:.2e} "
          f"flip_ind={np.abs(flipvals).max() if flipvals.size else 0:.2e} {tag}")
    if key in prev_sets:
        print("  CYCLE back to iteration", prev_sets[key])
        if it - prev_sets[key] <= 4:
            print("  added:", added, "removed:", removed)
            for j in flips:
                print(f"   node {j+1}: mu={mu[j]:.6e} gap={u_new[j]-lower_fill[j]:.6e} ind={ind[j]:.6e}")
            break
    prev_sets[key] = it
    if np.array_equal(new_active, active):
        print("converged")
        break
    active = new_active
