"""Admissible set, projections, and constrained slope against enumeration."""

import numpy as np
import pytest

from obstacleflow.energy import elastic_spec
from obstacleflow.gridspace import Grid, GridFunction, h_inner, h_norm
from obstacleflow.obstacle import (Obstacle, SolverError, active_set,
                                   admissible, cone_obstacle,
                                   constant_obstacle, hpr_pairing,
                                   metric_slope, project_C,
                                   tabulated_obstacle)

from oracles import oracle_project, smooth


def test_obstacle_validation(grid64):
    psi = cone_obstacle(grid64, 1.0, 0.25)
    assert psi.kind == "cone"
    assert psi.samples.max() == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(ValueError):
        # endpoint values must be strictly negative
        tabulated_obstacle(grid64, grid64.nodes, np.ones(grid64.n + 1))
    with pytest.raises(ValueError):
        constant_obstacle(grid64, 0.5)
    c = constant_obstacle(grid64, -2.0)
    assert np.all(c.samples == -2.0)


def test_cone_shape(grid64):
    A, a = 2.0, 0.25
    psi = cone_obstacle(grid64, A, a)
    x = grid64.nodes
    want = np.minimum(A * (x - a), A * ((1.0 - a) - x))
    want = np.minimum(want, A * a)
    # piecewise linear, symmetric, apex A*a at the plateau between a, 1-a
    assert np.abs(psi.samples - psi.samples[::-1]).max() <= 1e-12
    assert psi.samples.max() == pytest.approx(A * a, abs=1e-12)
    assert psi.samples[0] < 0.0 and psi.samples[-1] < 0.0


def test_admissible_and_active_set(grid64):
    psi = cone_obstacle(grid64, 1.0, 0.25)
    hi = GridFunction.from_callable(grid64, lambda x: np.sin(np.pi * x))
    assert admissible(hi, psi)
    lo = GridFunction(grid64, np.zeros(grid64.n + 1))
    assert not admissible(lo, psi)
    # touching within contact tolerance counts as active
    shallow = 0.2 * np.sin(np.pi * grid64.nodes)
    shallow[0] = shallow[-1] = 0.0
    touch = GridFunction(grid64, np.maximum(shallow, psi.samples))
    act = active_set(touch, psi)
    assert act.size > 0
    assert np.all(touch.values[act] <= psi.samples[act] + psi.contact_tol)


def test_projection_matches_enumeration(grid8, rng):
    psi = cone_obstacle(grid8, 1.0, 0.25)
    worst = 0.0
    for _ in range(20):
        v = smooth(grid8, rng, amp=float(rng.uniform(0.2, 1.5)), modes=6)
        want = oracle_project(v, psi)
        got = project_C(v, psi)
        worst = max(worst, float(np.abs(got.interior - want).max()))
    assert worst <= 1e-8


def test_projection_identity_on_admissible(grid64, rng):
    psi = constant_obstacle(grid64, -3.0)
    u = smooth(grid64, rng, amp=0.5)
    w = project_C(u, psi)
    assert np.abs(w.values - u.values).max() <= 1e-10


def test_projection_idempotent_and_feasible(grid64, rng):
    psi = cone_obstacle(grid64, 1.5, 0.3)
    v = smooth(grid64, rng, amp=0.4)
    w = project_C(v, psi)
    assert admissible(w, psi)
    w2 = project_C(w, psi)
    assert np.abs(w2.values - w.values).max() <= 1e-9


def test_projection_nonexpansive(grid64, rng):
    psi = cone_obstacle(grid64, 1.0, 0.25)
    for _ in range(5):
        v1 = smooth(grid64, rng, amp=1.0)
        v2 = smooth(grid64, rng, amp=1.0)
        d_in = h_norm(GridFunction(grid64, v1.values - v2.values))
        w1, w2 = project_C(v1, psi), project_C(v2, psi)
        d_out = h_norm(GridFunction(grid64, w1.values - w2.values))
        assert d_out <= d_in * (1.0 + 1e-9) + 1e-12


def test_projection_variational_characterization(grid64, rng):
    # (v - Pv, z - Pv)_H <= 0 for admissible z
    psi = cone_obstacle(grid64, 1.0, 0.25)
    v = smooth(grid64, rng, amp=0.3)
    w = project_C(v, psi)
    resid = GridFunction(grid64, v.values - w.values)
    for _ in range(10):
        z = smooth(grid64, rng, amp=0.5)
        zf = project_C(z, psi)
        gap = GridFunction(grid64, zf.values - w.values)
        assert h_inner(resid, gap) <= 1e-8


def test_hpr_pairing_nonnegative(grid64, rng):
    psi = cone_obstacle(grid64, 1.0, 0.25)
    for _ in range(10):
        w1 = smooth(grid64, rng, amp=float(rng.uniform(0.2, 1.0)))
        w2 = smooth(grid64, rng, amp=float(rng.uniform(0.2, 1.0)))
        assert hpr_pairing(w1, w2, psi) >= -1e-9


def test_metric_slope_unconstrained_is_gradient_norm(grid64, rng):
    from obstacleflow.energy import h_gradient
    spec = elastic_spec()
    psi = constant_obstacle(grid64, -1e6)
    u = smooth(grid64, rng, amp=0.6)
    want = h_norm(h_gradient(spec, u))
    assert metric_slope(spec, u, psi) == pytest.approx(want, rel=1e-12)


def test_metric_slope_requires_admissible(grid64):
    spec = elastic_spec()
    psi = cone_obstacle(grid64, 1.0, 0.25)
    lo = GridFunction(grid64, np.zeros(grid64.n + 1))
    with pytest.raises(ValueError):
        metric_slope(spec, lo, psi)


def test_metric_slope_descent_characterization(grid8, rng):
    # slope bounds the directional derivative over unit admissible directions
    spec = elastic_spec()
    psi = cone_obstacle(grid8, 1.0, 0.25)
    base = smooth(grid8, rng, amp=0.5)
    u = project_C(base, psi)
    s = metric_slope(spec, u, psi)
    from obstacleflow.energy import first_variation
    for _ in range(40):
        d = smooth(grid8, rng, modes=5)
        cand = GridFunction(grid8, u.values + d.values)
        if not admissible(cand, psi):
            continue
        drop = -first_variation(spec, u, d) / max(h_norm(d), 1e-14)
        assert drop <= s * (1.0 + 1e-8) + 1e-10


def test_grid_mismatch_raises(grid64, grid8, rng):
    psi = cone_obstacle(grid64, 1.0, 0.25)
    v = smooth(grid8, rng)
    with pytest.raises(Exception):
        project_C(v, psi)
