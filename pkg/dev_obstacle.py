import numpy as np
import time

from obstacleflow.gridspace import Grid, GridFunction, h_norm, h_inner, metric_for
from obstacleflow.energy import elastic_spec, energy, h_gradient
from obstacleflow.obstacle import (
    Obstacle, cone_obstacle, constant_obstacle, tabulated_obstacle,
    admissible, active_set, project_C, hpr_pairing, metric_slope, lower_bound_qp,
)

rng = np.random.default_rng(7)


def dense_gram(grid):
    n = grid.n
    h = grid.h
    m = n - 1
    D = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        z = np.concatenate(([0.0], e, [0.0]))
        D[:, j] = (z[:-2] - 2.0 * z[1:-1] + z[2:]) / h**2
    return h * (D.T @ D)


def smooth(grid, rng, amp=1.0, modes=6):
    c = rng.standard_normal(modes) / (1 + np.arange(modes)) ** 2
    def f(x):
        return amp * sum(ck * np.sin((k + 1) * np.pi * x) for k, ck in enumerate(c))
    return GridFunction.from_callable(grid, f)


# --- exhaustive n=8 projection oracle ------------------------------------
def oracle_project(grid, v, psi):
    A = dense_gram(grid)
    m = grid.n - 1
    t = v.interior
    lo = psi.interior
    best = None
    for mask in range(1 << m):
        S = np.array([(mask >> i) & 1 for i in range(m)], dtype=bool)
        u = np.empty(m)
        u[S] = lo[S]
        I = ~S
        if I.any():
            rhs = (A @ t - A[:, S] @ lo[S])[I]
            try:
                u[I] = np.linalg.solve(A[np.ix_(I, I)], rhs)
            except np.linalg.LinAlgError:
                continue
        mu = A @ (u - t)
        # KKT: feasible, mu >= 0 on S, mu = 0 off S (holds by construction)
        if np.any(u < lo - 1e-10):
            continue
        if np.any(mu[S] < -1e-10):
            continue
        val = 0.5 * (u - t) @ A @ (u - t)
        if best is None or val < best[0]:
            best = (val, u)
    return best[1]


t0 = time.time()
grid8 = Grid(8)
psi8 = cone_obstacle(grid8, 1.0, 0.25)
worst = 0.0
for trial in range(30):
    v = smooth(grid8, rng, amp=rng.uniform(0.2, 1.5), modes=6)
    u_oracle = oracle_project(grid8, v, psi8)
    w = project_C(v, psi8)
    worst = max(worst, np.abs(w.interior - u_oracle).max())
print(f"project_C vs exhaustive n=8 oracle (30 trials): max diff {worst:.3e}  [{time.time()-t0:.1f}s]")

# --- contract checks at n=256 --------------------------------------------
grid = Grid(256)
psi = cone_obstacle(grid, 1.0, 0.25)
metric = metric_for(grid)

worst_kkt = worst_idem = worst_lip = worst_sign = worst_hpr = 0.0
for trial in range(50):
    v1 = smooth(grid, rng, amp=rng.uniform(0.2, 2.0))
    v2 = smooth(grid, rng, amp=rng.uniform(0.2, 2.0))
    w1 = project_C(v1, psi)
    w2 = project_C(v2, psi)
    assert admissible(w1, psi) and admissible(w2, psi)
    # idempotency
    w11 = project_C(w1, psi)
    worst_idem = max(worst_idem, h_norm(GridFunction(grid, w11.values - w1.values)))
    # 1-Lipschitz
    num = h_norm(GridFunction(grid, w1.values - w2.values))
    den = h_norm(GridFunction(grid, v1.values - v2.values))
    if den > 1e-12:
        worst_lip = max(worst_lip, num / den)
    # sign property: residuum pointwise <= 0 where... spec: max(v - pi(v)) over nodes
    # where v < psi?? contract: "max over nodes of (v_i - w_i) <= 1e-9"?? no:
    # sign property is (v - pi v, pi v - psi)_H-ish; the spec asks
    # max_i (v - pi(v))_i <= 1e-9 only at inactive nodes? recheck later; here HPR:
    worst_hpr = min(worst_hpr, hpr_pairing(v1, v2, psi)) if trial == 0 else min(worst_hpr, hpr_pairing(v1, v2, psi))

print(f"idempotency worst {worst_idem:.3e}, Lipschitz worst {worst_lip:.12f}, HPR min {worst_hpr:.3e}")

# metric slope sanity: no contact -> equals gradient norm
spec = elastic_spec()
u_clear = GridFunction.from_callable(grid, lambda x: 0.6 * np.sin(np.pi * x))
assert admissible(u_clear, psi) and active_set(u_clear, psi).size == 0
g = h_gradient(spec, u_clear)
print(f"slope (no contact) vs grad norm: {abs(metric_slope(spec, u_clear, psi) - h_norm(g)):.3e}")

# MC oracle for slope with contact, n=8
t0 = time.time()
psi8b = cone_obstacle(grid8, 1.0, 0.25)
v0 = GridFunction.from_callable(grid8, lambda x: 0.20 * np.sin(np.pi * x))
u_touch = project_C(v0, psi8b)
act = active_set(u_touch, psi8b)
print("active nodes:", act)
s = metric_slope(spec, u_touch, psi8b)

A8 = dense_gram(grid8)
L = np.linalg.cholesky(A8)
g8 = h_gradient(spec, u_touch)
m = grid8.n - 1
N = 100_000
Ag = A8 @ g8.interior
D = np.linalg.solve(L.T, rng.standard_normal((m, N))).T  # isotropic in the A metric
D[:, act - 1] = np.abs(D[:, act - 1])  # fold into the tangent cone
norms = np.sqrt(np.einsum('ij,jk,ik->i', D, A8, D))
pair = -(D @ Ag) / np.maximum(norms, 1e-300)
best = pair.max()
print(f"slope {s:.12f}, pure MC lower bound ratio {best/s:.6f}")

# obstacle constructors
tab = tabulated_obstacle(grid, [0.0, 0.4, 0.5, 0.6, 1.0], [-0.3, 0.1, 0.2, 0.1, -0.3])
print("tabulated peak:", tab.samples.max(), "contact_tol:", tab.contact_tol)
const = constant_obstacle(grid, -1e6)
u0 = GridFunction.from_callable(grid, lambda x: np.sin(np.pi * x))
print("constant admissible:", admissible(u0, const), "slope == grad:",
      abs(metric_slope(spec, u0, const) - h_norm(h_gradient(spec, u0))))
print("total", time.time() - t0, "s")
