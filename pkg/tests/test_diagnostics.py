"""Per-trajectory checks: report records, indicators, and classification."""

import dataclasses

import numpy as np
import pytest

from obstacleflow.diagnostics import (_TS_COLUMNS, ContactMeasure,
                                      DichotomyVerdict, bc_tol, classify,
                                      contact_trap_check, cutoff_eta,
                                      diagnostics_report, dissipation_report,
                                      ede_residual, extract_contact_measure,
                                      fvi_residual, gradient_distance_check,
                                      navier_check, symmetry_error,
                                      third_diff_sup, timeseries)
from obstacleflow.energy import elastic_spec, quadratic_test_spec
from obstacleflow.engine import FlowConfig, Trajectory, run_flow
from obstacleflow.gridspace import Grid, GridFunction
from obstacleflow.obstacle import (Obstacle, active_set, cone_obstacle,
                                   constant_obstacle, project_C)

EXPECTED_CHECKS = (
    "energy_descent", "telescoped_dissipation", "dissipation_rate",
    "holder_bound", "growth_bound", "gradient_norm_bound",
    "pairwise_energy_bound", "contact_mass_bound", "complementarity",
    "el_residual", "fvi_residual", "gradient_distance", "ede_residual",
    "navier_bc", "symmetry", "hpr_pairing",
)


@pytest.fixture(scope="module")
def contact_traj():
    # a symmetric flow that settles onto a low cone: contact develops and
    # every check family (mass, complementarity, inequalities) is exercised
    grid = Grid(64)
    psi = cone_obstacle(grid, 1.6, 0.25)
    vals = 0.5 * np.sin(np.pi * grid.nodes)
    vals[0] = vals[-1] = 0.0
    u0 = project_C(GridFunction(grid, vals), psi)
    cfg = FlowConfig(spec=elastic_spec(), psi=psi, u0=u0, tau=0.01, T=0.6)
    traj = run_flow(cfg)
    assert any(s.mu.sum() > 0.0 for s in traj.steps), "flow never touched"
    return traj


def test_report_record_shape(contact_traj):
    recs = diagnostics_report(contact_traj, seed=7)
    assert [r["name"] for r in recs] == list(EXPECTED_CHECKS)
    for r in recs:
        assert set(r) == {"name", "passed", "lhs", "rhs", "tolerance",
                          "step_range"}
        assert isinstance(r["passed"], bool)
        assert isinstance(r["lhs"], float)
        lo, hi = r["step_range"]
        assert isinstance(lo, int) and isinstance(hi, int)
    assert all(r["passed"] for r in recs), [
        r["name"] for r in recs if not r["passed"]]


def test_report_skips_symmetry_for_asymmetric_data(rng):
    grid = Grid(32)
    psi = constant_obstacle(grid, -5.0)
    vals = 0.3 * np.sin(np.pi * grid.nodes) + 0.1 * np.sin(2 * np.pi * grid.nodes)
    vals[0] = vals[-1] = 0.0
    u0 = GridFunction(grid, vals)
    traj = run_flow(FlowConfig(spec=elastic_spec(), psi=psi, u0=u0,
                               tau=0.02, T=0.1))
    names = [r["name"] for r in diagnostics_report(traj, seed=3)]
    assert "symmetry" not in names
    assert len(names) == len(EXPECTED_CHECKS) - 1


def test_navier_parabola_exact():
    # one-sided second-order stencils are exact on quadratics
    grid = Grid(64)
    u = GridFunction.from_callable(grid, lambda x: x * (1.0 - x))
    b0, b1 = navier_check(u)
    assert b0 == pytest.approx(-2.0, abs=1e-9)
    assert b1 == pytest.approx(-2.0, abs=1e-9)
    assert bc_tol(grid.h) == pytest.approx(50.0 * grid.h)


def test_third_diff_exact_on_cubic():
    grid = Grid(32)
    u = GridFunction.from_callable(grid, lambda x: x ** 3 - x)
    assert third_diff_sup(u) == pytest.approx(6.0, abs=1e-9)


def test_symmetry_error():
    grid = Grid(16)
    sym = GridFunction.from_callable(grid, lambda x: np.sin(np.pi * x))
    assert symmetry_error(sym) <= 1e-15
    skew = GridFunction.from_callable(grid, lambda x: np.sin(2 * np.pi * x))
    assert symmetry_error(skew) > 0.1


def test_cutoff_eta_profile():
    grid = Grid(256)
    eta = cutoff_eta(grid, 0.125)
    x = grid.nodes
    inner = (x >= 0.125) & (x <= 0.875)
    assert np.abs(eta.values[inner] - 1.0).max() <= 1e-12
    assert eta.values[0] == 0.0 and eta.values[-1] == 0.0
    assert eta.values.min() >= 0.0 and eta.values.max() <= 1.0 + 1e-12
    assert np.abs(eta.values - eta.values[::-1]).max() <= 1e-12
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            cutoff_eta(grid, bad)


def test_contact_measure(contact_traj):
    K = len(contact_traj.steps)
    k = next(k for k in range(K, 0, -1)
             if contact_traj.steps[k - 1].mu.sum() > 0.0)
    cm = extract_contact_measure(contact_traj, k)
    assert isinstance(cm, ContactMeasure)
    assert cm.masses.min() >= 0.0
    assert cm.total_mass == pytest.approx(cm.masses.sum())
    assert cm.support.size > 0
    psi = contact_traj.psi
    w = contact_traj.steps[k - 1].w
    gaps = w.values[cm.support] - psi.samples[cm.support]
    assert gaps.max() <= psi.contact_tol
    assert cm.cumulative[0] == pytest.approx(cm.total_mass)
    assert cm.cumulative[-1] == pytest.approx(cm.masses[-1])
    assert 0.0 < cm.total_mass <= cm.bound
    for bad in (0, K + 1):
        with pytest.raises(IndexError):
            extract_contact_measure(contact_traj, bad)


def test_dissipation_report(contact_traj):
    rows = dissipation_report(contact_traj)
    K = len(contact_traj.steps)
    assert len(rows) == K
    E = contact_traj.energies()
    tau = contact_traj.tau
    for k, (t, e, rate) in enumerate(rows):
        assert t == pytest.approx((k + 1) * tau)
        assert e == pytest.approx(E[k + 1])
        assert rate == pytest.approx((E[k] - E[k + 1]) / tau)


def test_dissipation_report_rejects_rising_energy(contact_traj):
    doctored = dataclasses.replace(
        contact_traj.steps[-1],
        energy_after=contact_traj.steps[-1].energy_after + 1.0)
    bad = Trajectory(spec=contact_traj.spec, psi=contact_traj.psi,
                     u0=contact_traj.u0, tau=contact_traj.tau,
                     steps=list(contact_traj.steps[:-1]) + [doctored],
                     inner_tol=contact_traj.inner_tol)
    with pytest.raises(ValueError, match="increased"):
        dissipation_report(bad)


def test_ede_residual(contact_traj):
    tau = contact_traj.tau
    K = len(contact_traj.steps)
    res = ede_residual(contact_traj, K * tau)
    cap = 10.0 * (1.0 + contact_traj.energies()[0]) * (
        tau + contact_traj.inner_tol / tau)
    assert abs(res) <= cap
    with pytest.raises(ValueError):
        ede_residual(contact_traj, (K + 1) * tau)
    with pytest.raises(ValueError):
        ede_residual(contact_traj, 0.5 * tau)


def test_ede_zero_for_stationary_flow():
    grid = Grid(32)
    psi = constant_obstacle(grid, -1.0)
    zero = GridFunction(grid, np.zeros(grid.n + 1))
    traj = run_flow(FlowConfig(spec=elastic_spec(), psi=psi, u0=zero,
                               tau=0.05, T=0.5))
    assert abs(ede_residual(traj, 0.5)) <= 1e-10


def test_fvi_and_gradient_distance(contact_traj):
    grid = contact_traj.grid
    psi = contact_traj.psi
    k = len(contact_traj.steps) // 2
    w = contact_traj.iterate(k)
    probes = [w, contact_traj.iterate(k - 1), contact_traj.u0]
    res = fvi_residual(contact_traj, k, probes)
    assert res >= -1e-7 * (1.0 + contact_traj.steps[k - 1].step_norm
                           / contact_traj.tau)
    lhs, rhs = gradient_distance_check(contact_traj, k)
    assert lhs <= rhs + 1e-6 * (1.0 + rhs)
    with pytest.raises(IndexError):
        fvi_residual(contact_traj, 0, probes)
    with pytest.raises(IndexError):
        gradient_distance_check(contact_traj, len(contact_traj.steps) + 1)


def test_contact_trap_check():
    # a raised plateau forces contact across [0.2, 0.8]: trapped for small
    # margins, not for margins that cut into the plateau
    grid = Grid(64)
    x = grid.nodes
    samples = np.where((x >= 0.2) & (x <= 0.8), 0.05, -0.5)
    samples[0] = samples[-1] = -0.5
    psi = Obstacle(grid, samples, kind="tabulated")
    u0 = project_C(GridFunction(grid, np.zeros(grid.n + 1)), psi)
    traj = run_flow(FlowConfig(spec=elastic_spec(), psi=psi, u0=u0,
                               tau=0.01, T=0.05))
    assert active_set(traj.final, psi).size > 0
    assert contact_trap_check(traj, 0.15) is True
    assert contact_trap_check(traj, 0.25) is False
    for bad in (0.0, 0.5, -1.0):
        with pytest.raises(ValueError):
            contact_trap_check(traj, bad)


def test_timeseries_columns(contact_traj):
    cols = timeseries(contact_traj)
    K = len(contact_traj.steps)
    assert tuple(cols) == _TS_COLUMNS
    for name, arr in cols.items():
        assert len(arr) == K + 1, name
    assert cols["k"][0] == 0 and cols["t"][0] == 0.0
    assert cols["step_norm"][0] == 0.0
    assert cols["el_residual"][0] == 0.0
    assert cols["mu_mass"][0] == 0.0
    assert cols["energy"][0] == pytest.approx(contact_traj.energies()[0])
    assert cols["symmetry_err"].max() <= 1e-8
    assert np.all(cols["mu_mass"][1:] >= 0.0)
    assert cols["slope"].min() >= 0.0


def test_classify_requires_elastic(rng):
    grid = Grid(32)
    psi = constant_obstacle(grid, -5.0)
    vals = 0.3 * np.sin(np.pi * grid.nodes)
    vals[0] = vals[-1] = 0.0
    traj = run_flow(FlowConfig(spec=quadratic_test_spec(), psi=psi,
                               u0=GridFunction(grid, vals), tau=0.05, T=0.25))
    with pytest.raises(ValueError, match="elastic"):
        classify(traj, psi)


def test_classify_undecided_on_short_run():
    grid = Grid(64)
    psi = constant_obstacle(grid, -5.0)
    vals = 0.5 * np.sin(np.pi * grid.nodes)
    vals[0] = vals[-1] = 0.0
    traj = run_flow(FlowConfig(spec=elastic_spec(), psi=psi,
                               u0=GridFunction(grid, vals), tau=0.001, T=0.003))
    verdict = classify(traj, psi, seed=11)
    assert isinstance(verdict, DichotomyVerdict)
    assert verdict.tag == "undecided"
    ev = verdict.evidence
    assert set(ev) == {
        "min_slope", "final_slope", "slope_tol", "slope_sample_stride",
        "max_first_diff_sup", "initial_first_diff_sup",
        "final_first_diff_sup", "sup_growth_ratio", "deriv_cap",
        "growth_factor", "critical_pairing_min", "critical_pairing_unit_min",
        "energy_initial", "energy_final", "steps",
    }
    assert ev["steps"] == 3
    assert ev["final_slope"] > ev["slope_tol"]
    assert ev["sup_growth_ratio"] < 2.0


def test_classify_subconvergent_on_relaxing_run():
    # unconstrained elastic flow from small data relaxes to rest
    grid = Grid(64)
    psi = constant_obstacle(grid, -5.0)
    vals = 0.2 * np.sin(np.pi * grid.nodes)
    vals[0] = vals[-1] = 0.0
    traj = run_flow(FlowConfig(spec=elastic_spec(), psi=psi,
                               u0=GridFunction(grid, vals), tau=0.05, T=10.0))
    verdict = classify(traj, psi, seed=5)
    assert verdict.tag == "subconvergent-candidate"
    assert verdict.evidence["final_slope"] <= verdict.evidence["slope_tol"]
    # at a free minimum the pairing against admissible directions is flat
    assert verdict.evidence["critical_pairing_unit_min"] >= -1e-6
