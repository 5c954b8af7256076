"""Dev checks for diagnostics.py against closed forms and known behavior."""
import numpy as np

from obstacleflow.gridspace import Grid, GridFunction, h_norm
from obstacleflow.energy import elastic_spec, quadratic_test_spec, energy, h_gradient
from obstacleflow.obstacle import (cone_obstacle, constant_obstacle, project_C,
                                   active_set)
from obstacleflow.engine import FlowConfig, run_flow
from obstacleflow.diagnostics import (
    navier_check, bc_tol, third_diff_sup, symmetry_error, dissipation_report,
    fvi_residual, extract_contact_measure, ede_residual,
    gradient_distance_check, classify, contact_trap_check, timeseries,
    diagnostics_report, cutoff_eta)

g256 = Grid(256)
g64 = Grid(64)
elastic = elastic_spec()
quad = quadratic_test_spec()

# --- pointwise diagnostics ------------------------------------------------
cubic = GridFunction.from_callable(g256, lambda x: x * x * (1.0 - x))
print("third_diff_sup x^2(1-x):", third_diff_sup(cubic), "(want 6)")
zero = GridFunction(g256, np.zeros(g256.n + 1))
print("navier zero:", navier_check(zero))
sine = GridFunction.from_callable(g256, lambda x: np.sin(np.pi * x))
print("navier sin(pi x):", navier_check(sine), "h^2 =", g256.h ** 2)
para = GridFunction.from_callable(g256, lambda x: x * (1.0 - x))
print("navier x(1-x):", navier_check(para), "(want ~ -2), bc_tol:", bc_tol(g256.h))
asym = GridFunction.from_callable(g256, lambda x: np.sin(np.pi * x) + 0.2 * np.sin(2 * np.pi * x))
print("symmetry_error sine:", symmetry_error(sine), " asym:", symmetry_error(asym))

# cutoff norm stability across grids
for n in (64, 128, 256, 512):
    eta = cutoff_eta(Grid(n), 0.125)
    print(f"  ||eta||_H at n={n}: {h_norm(eta):.6f}")

# --- quadratic flow: dissipation + ede + gradient distance ----------------
u0 = GridFunction.from_callable(g64, lambda x: np.sin(np.pi * x))
psi_low = constant_obstacle(g64, -1e6)
cfg = FlowConfig(spec=quad, psi=psi_low, u0=u0, tau=0.01, T=0.5)
traj = run_flow(cfg)
rep = dissipation_report(traj)
print("quadratic dissipation rows:", len(rep), "first:", rep[0], "last rate:", rep[-1][2])
E = traj.energies()
for T in (0.1, 0.5):
    print(f"  ede_residual quadratic T={T}:", ede_residual(traj, T))
lhs, rhs = gradient_distance_check(traj, 3)
print("gradient_distance quadratic (inactive):", lhs, rhs)

# tau-halving of the ede residual
vals = []
for tau in (0.02, 0.01, 0.005):
    t2 = run_flow(FlowConfig(spec=quad, psi=psi_low, u0=u0, tau=tau, T=0.4))
    vals.append(ede_residual(t2, 0.4))
print("ede tau-halving (quadratic):", vals, "ratios:",
      [vals[i] / vals[i + 1] for i in range(2)])

# --- stationary trajectory -------------------------------------------------
z0 = GridFunction(g64, np.zeros(g64.n + 1))
print("grad at zero (elastic):", h_norm(h_gradient(elastic, z0)))
cfg0 = FlowConfig(spec=elastic, psi=constant_obstacle(g64, -1.0), u0=z0, tau=0.05, T=0.5)
traj0 = run_flow(cfg0)
rep0 = dissipation_report(traj0)
print("stationary rates max |.|:", max(abs(r[2]) for r in rep0),
      " ede:", ede_residual(traj0, 0.5))

# --- elastic contact flow ---------------------------------------------------
spec = elastic
psi = cone_obstacle(g256, 1.0, 0.25)
start = GridFunction.from_callable(g256, lambda x: 0.32 * np.sin(np.pi * x))
u0c = project_C(start, psi)
cfgc = FlowConfig(spec=spec, psi=psi, u0=u0c, tau=0.005, T=1.0)
trajc = run_flow(cfgc)
acts = [active_set(w, psi).size for w in trajc.iterates()]
print("contact flow: steps", len(trajc.steps), "active sizes first/max/last:",
      acts[0], max(acts), acts[-1])
print("energies first/last:", trajc.energies()[0], trajc.energies()[-1])

# fvi residual at a contact step
kmid = len(trajc.steps) // 2
w = trajc.iterate(kmid)
rng = np.random.default_rng(7)
probes = [w, trajc.iterate(kmid - 1)]
for _ in range(30):
    pert = 0.3 * np.sin(np.pi * g256.nodes) * rng.standard_normal()
    pert[0] = 0.0
    pert[-1] = 0.0
    probes.append(project_C(GridFunction(g256, w.values + pert), psi))
print("fvi at self-probe only:", fvi_residual(trajc, kmid, [w]))
print("fvi min over probes:", fvi_residual(trajc, kmid, probes))

# contact measure
ks = [k for k in range(1, len(trajc.steps) + 1)
      if trajc.steps[k - 1].mu.sum() > 0]
print("steps with contact mass:", len(ks))
if ks:
    cm = extract_contact_measure(trajc, ks[-1])
    print("contact measure: total", cm.total_mass, "bound", cm.bound,
          "support x:", g256.nodes[cm.support])
    print("cumulative head/tail:", cm.cumulative[0], cm.cumulative[-1])

# gradient distance along contact steps
worst = -np.inf
for k in range(1, len(trajc.steps) + 1, 10):
    lhs, rhs = gradient_distance_check(trajc, k)
    worst = max(worst, lhs - rhs)
print("gradient_distance contact worst lhs-rhs:", worst)

# navier along the flow (calibration data)
for n in (128, 256, 512):
    gn = Grid(n)
    pn = cone_obstacle(gn, 1.0, 0.25)
    s0 = project_C(GridFunction.from_callable(
        gn, lambda x: 0.32 * np.sin(np.pi * x)), pn)
    tn = run_flow(FlowConfig(spec=spec, psi=pn, u0=s0, tau=0.005, T=0.5))
    navs = [max(abs(b) for b in navier_check(u)) for u in tn.iterates()]
    print(f"  navier n={n}: max {max(navs):.5f}  ratio/h {max(navs) * n:.2f}  "
          f"bc_tol {bc_tol(gn.h):.5f}")

# classify: unconstrained relaxation
cfgu = FlowConfig(spec=spec, psi=constant_obstacle(g256, -1e6),
                  u0=GridFunction.from_callable(g256, lambda x: 0.4 * np.sin(np.pi * x)),
                  tau=0.01, T=1.0)
tru = run_flow(cfgu)
vu = classify(tru, tru.psi)
print("classify unconstrained:", vu.tag, "final_slope:", vu.evidence["final_slope"],
      "u_inf sup:", np.abs(tru.final.values).max())

# classify on the contact flow
vc = classify(trajc, psi)
print("classify contact:", vc.tag, {k: round(v, 6) if isinstance(v, float) else v
                                     for k, v in vc.evidence.items()})

# contact trap
print("trap delta=a/2:", contact_trap_check(trajc, 0.125),
      " trap delta=0.49:", contact_trap_check(trajc, 0.49))

# timeseries and the full report
ts = timeseries(trajc)
print("timeseries cols:", list(ts), "rows:", len(ts["t"]))
recs = diagnostics_report(trajc)
for r in recs:
    flag = "ok " if r["passed"] else "FAIL"
    print(f"  [{flag}] {r['name']:24s} lhs={r['lhs']:.3e} rhs={r['rhs']:.3e} "
          f"tol={r['tolerance']:.3e}")

# ede tau-halving on the elastic contact instance
vals = []
for tau in (0.02, 0.01, 0.005):
    tt = run_flow(FlowConfig(spec=spec, psi=psi, u0=u0c, tau=tau, T=0.5))
    vals.append(ede_residual(tt, 0.5))
print("ede tau-halving (elastic contact):", vals,
      "ratios:", [vals[i] / vals[i + 1] for i in range(2)])
