import numpy as np
import time
from itertools import product

from obstacleflow.gridspace import Grid, GridFunction, h_norm, h_inner, metric_for
from obstacleflow.energy import elastic_spec, quadratic_test_spec, energy, dual_vector
from obstacleflow.obstacle import (
    Obstacle, cone_obstacle, constant_obstacle, admissible, project_C,
)
from obstacleflow.engine import (
    FlowConfig, mm_step, el_certificate, run_flow, interpolate, refine_tau_compare,
)

rng = np.random.default_rng(11)


def dense_gram(grid):
    n, h, m = grid.n, grid.h, grid.n - 1
    D = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m); e[j] = 1.0
        z = np.concatenate(([0.0], e, [0.0]))
        D[:, j] = (z[:-2] - 2.0*z[1:-1] + z[2:]) / h**2
    return h * (D.T @ D)


def smooth(grid, rng, amp=1.0, modes=6):
    c = rng.standard_normal(modes) / (1 + np.arange(modes)) ** 2
    def f(x):
        return amp * sum(ck * np.sin((k + 1) * np.pi * x) for k, ck in enumerate(c))
    return GridFunction.from_callable(grid, f)


# 1. quadratic closed form: w = v / (1 + 2 tau), no obstacle
grid = Grid(256)
qspec = quadratic_test_spec()
deep = constant_obstacle(grid, -1e6)
v = smooth(grid, rng, amp=1.0)
for tau in (0.5, 0.05, 0.005):
    rep = mm_step(qspec, deep, v, tau)
    want = v.values / (1.0 + 2.0 * tau)
    err = np.abs(rep.w.values - want).max()
    print(f"quadratic tau={tau}: max err {err:.3e} iters={rep.inner_iters} method={rep.method} kkt={rep.kkt_residual:.2e}")

# 2. v = 0, psi <= 0 -> w = 0, mu = 0
espec = elastic_spec()
psi_cone = cone_obstacle(grid, 1.0, 0.25)
zero = GridFunction(grid, np.zeros(grid.n + 1))
# psi_cone peak is 0.25 > 0 so zero is NOT admissible; use shifted-down obstacle
shift = Obstacle(grid, psi_cone.samples - 0.3, kind="tabulated")
rep = mm_step(espec, shift, zero, 0.01)
print(f"zero start: |w| {np.abs(rep.w.values).max():.3e} mu_mass {rep.mu.sum():.3e} E_after {rep.energy_after:.3e}")

# 3. exhaustive n=8 oracle for the full mm step (elastic, shifted cone)
grid8 = Grid(8)
espec8 = elastic_spec()
cone8 = cone_obstacle(grid8, 1.0, 0.25)
shift8 = Obstacle(grid8, cone8.samples - 0.3, kind="tabulated")
A8 = dense_gram(grid8)
m8 = grid8.n - 1


def oracle_mm(spec, psi, v, tau):
    """global minimum of Phi over C by enumerating active subsets with dense
    Newton solves on each face, then filtering KKT and taking min Phi."""
    lo = psi.interior
    vi = v.interior
    best = None
    for mask in range(1 << m8):
        S = np.array([(mask >> i) & 1 for i in range(m8)], dtype=bool)
        I = ~S
        u = np.empty(m8)
        u[S] = lo[S]
        # solve the pinned nonlinear system by plain Newton from v
        x = vi[I].copy() if I.any() else np.empty(0)
        ok = True
        if I.any():
            for it in range(200):
                u[I] = x
                gf = GridFunction.from_interior(grid8, u)
                F = A8 @ (u - vi) / tau + dual_vector(spec, gf)
                from obstacleflow.energy import hessian_band
                hb = hessian_band(spec, gf)
                Hd = np.zeros((m8, m8))
                Hd += np.diag(hb[2])
                Hd += np.diag(hb[1, 1:], 1) + np.diag(hb[1, 1:], -1)
                Hd += np.diag(hb[0, 2:], 2) + np.diag(hb[0, 2:], -2)
                M = A8 / tau + Hd
                try:
                    dx = np.linalg.solve(M[np.ix_(I, I)], -F[I])
                except np.linalg.LinAlgError:
                    ok = False
                    break
                x = x + dx
                if np.abs(dx).max() < 1e-14 * (1 + np.abs(x).max()):
                    break
            else:
                ok = False
        if not ok:
            continue
        u[I] = x
        gf = GridFunction.from_interior(grid8, u)
        F = A8 @ (u - vi) / tau + dual_vector(spec, gf)
        mu = np.where(S, F, 0.0)
        if np.any(u[I] < lo[I] - 1e-12):      # feasibility off the face
            continue
        if np.any(mu[S] < -1e-10 * (1 + np.abs(mu).max())):   # dual sign
            continue
        phi = h_norm(GridFunction(grid8, gf.values - v.values)) ** 2 / (2 * tau) + energy(spec, gf)
        if best is None or phi < best[0]:
            best = (phi, u.copy(), mu.copy())
    return best


t0 = time.time()
worst_u = worst_mu = 0.0
tau8 = 0.05
for trial in range(20):
    raw = smooth(grid8, rng, amp=rng.uniform(0.3, 1.0), modes=5)
    vstart = project_C(raw, shift8)
    rep = mm_step(espec8, shift8, vstart, tau8)
    got = oracle_mm(espec8, shift8, vstart, tau8)
    phi_o, u_o, mu_o = got
    worst_u = max(worst_u, np.abs(rep.w.interior - u_o).max())
    worst_mu = max(worst_mu, np.abs(rep.mu[1:-1] - mu_o).max())
print(f"mm_step vs exhaustive n=8 (20 trials): u diff {worst_u:.3e}, mu diff {worst_mu:.3e} [{time.time()-t0:.1f}s]")

# 4. el_certificate with random projected probes
probes = []
for _ in range(20):
    cand = GridFunction(grid8, rep.w.values + 0.3 * smooth(grid8, rng, amp=1.0).values)
    probes.append(project_C(cand, shift8))
cert = el_certificate(rep, vstart, tau8, shift8, probes + [vstart])
print(f"el_certificate over 21 probes: {cert:.3e} (>= -1e-7 wanted); report.el_residual {rep.el_residual:.3e}")

# 5. a short elastic flow with contact at n=256: descent + complementarity + speed
u0 = GridFunction.from_callable(grid, lambda x: 0.5 * np.sin(np.pi * x))
cfg = FlowConfig(spec=espec, psi=psi_cone, u0=u0, tau=0.005, T=0.25)
t0 = time.time()
traj = run_flow(cfg)
el = time.time() - t0
E = traj.energies()
mono = np.all(np.diff(E) <= 1e-10 * (1 + np.abs(E[:-1])))
mu_masses = [s.mu.sum() for s in traj.steps]
contact_steps = sum(1 for s in traj.steps if s.mu.sum() > 1e-10)
iters = [s.inner_iters for s in traj.steps]
meth = {s.method for s in traj.steps}
print(f"flow 50 steps n=256: {el:.2f}s, E {E[0]:.4f}->{E[-1]:.4f} monotone={mono} "
      f"contact steps {contact_steps}/50, max mu_mass {max(mu_masses):.4f}, iters max {max(iters)}, methods {meth}")

# does the constrained flow rest ON the obstacle? (cone peak 0.25 < 0.5 amplitude)
final_active = np.flatnonzero(traj.final.values[1:-1] <= psi_cone.interior + psi_cone.contact_tol)
print("final active interior nodes:", final_active + 1, "of", grid.n - 1)

# 6. symmetry preservation over the flow
sym_err = max(np.abs(s.w.values - s.w.values[::-1]).max() for s in traj.steps)
print(f"symmetry error over flow: {sym_err:.3e}")

# 7. quadratic flow vs closed form over many steps
vq = smooth(grid, rng, amp=1.0)
cfgq = FlowConfig(spec=qspec, psi=deep, u0=vq, tau=0.01, T=1.0)
trajq = run_flow(cfgq)
errs = []
for k in (1, 10, 50, 100):
    want = vq.values / (1.0 + 2.0 * cfgq.tau) ** k
    errs.append(np.abs(trajq.iterate(k).values - want).max())
print(f"quadratic flow errs at k=1,10,50,100: {[f'{e:.2e}' for e in errs]}")

# 8. interpolate + refine_tau_compare on the quadratic
ts = [0.0, 0.004, 0.01, 0.995, 1.0]
for t in ts:
    interpolate(trajq, t, "constant"); interpolate(trajq, t, "linear")
cfgq2 = FlowConfig(spec=qspec, psi=deep, u0=vq, tau=0.1, T=1.0)
diffs = refine_tau_compare(cfgq2, [0.1, 0.05, 0.025])
print(f"refine_tau quadratic diffs: {diffs} ratios {diffs[1:]/diffs[:-1]}")
