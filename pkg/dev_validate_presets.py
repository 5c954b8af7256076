"""Full validation of the three calibrated presets at n=256."""
import time
import numpy as np

from obstacleflow.gridspace import first_diff_sup
from obstacleflow.energy import energy
from obstacleflow.obstacle import active_set, metric_slope
from obstacleflow.engine import run_flow
from obstacleflow.elastica import G_inv
from obstacleflow.presets import build_preset
from obstacleflow.diagnostics import classify, diagnostics_report, navier_check, bc_tol


def run_one(name, **kw):
    pre = build_preset(name, **kw)
    cfg = pre.config
    E0 = energy(cfg.spec, cfg.u0)
    print(f"--- {name}: n={cfg.grid.n} tau={cfg.tau} T={cfg.T} "
          f"inner_tol={cfg.inner_tol} E0={E0:.4f} "
          f"sup_du0={first_diff_sup(cfg.u0):.4f}", flush=True)
    t0 = time.perf_counter()
    traj = run_flow(cfg)
    dt = time.perf_counter() - t0
    K = len(traj.steps)
    print(f"    flow: {K} steps in {dt:.1f}s ({dt/K*1e3:.1f} ms/step) "
          f"methods={ {r.method for r in traj.steps} }", flush=True)
    sups = np.array([first_diff_sup(u) for u in traj.iterates()])
    marks = sorted(set(list(range(0, K + 1, max(1, K // 8))) + [K]))
    for k in marks:
        print(f"    t={k*cfg.tau:7.1f} sup={sups[k]:.4f} "
              f"E={traj.energies()[k]:.4f} "
              f"contact={active_set(traj.iterate(k), cfg.psi).size}", flush=True)
    dbl = np.nonzero(sups >= 2.0 * sups[0])[0]
    print(f"    first doubling k: {dbl[0] if dbl.size else None} "
          f"(t={dbl[0]*cfg.tau if dbl.size else float('nan'):.1f}) "
          f"growth={sups.max()/sups[0]:.3f}", flush=True)
    t0 = time.perf_counter()
    verdict = classify(traj, cfg.psi)
    print(f"    classify ({time.perf_counter()-t0:.1f}s): {verdict.tag} "
          f"(expected {pre.expected_verdict})", flush=True)
    ev = verdict.evidence
    print(f"    final_slope={ev['final_slope']:.3e} tol={ev['slope_tol']:.3e} "
          f"min_slope={ev['min_slope']:.3e} stride={ev['slope_sample_stride']}",
          flush=True)
    print(f"    pairing_min={ev['critical_pairing_min']:.3e} "
          f"unit={ev['critical_pairing_unit_min']:.3e}", flush=True)
    if name == "subconverge":
        cap = G_inv(np.sqrt(E0) / 2.0) + 0.05
        print(f"    sup cap: {sups.max():.4f} <= {cap:.4f}: {sups.max() <= cap}",
              flush=True)
    nav = max(max(abs(b) for b in navier_check(u)) for u in traj.iterates())
    print(f"    navier max |b| = {nav:.3e} vs bc_tol {bc_tol(cfg.grid.h):.3e}",
          flush=True)
    t0 = time.perf_counter()
    recs = diagnostics_report(traj)
    print(f"    report ({time.perf_counter()-t0:.1f}s):", flush=True)
    for r in recs:
        mark = "PASS" if r["passed"] else "FAIL"
        print(f"      {mark} {r['name']}: lhs={r['lhs']:.3e} rhs={r['rhs']:.3e} "
              f"tol={r['tolerance']:.3e}", flush=True)
    return traj


run_one("unconstrained")
run_one("subconverge")
run_one("blowup")
