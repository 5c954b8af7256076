"""Closed-form elastica family against mpmath/quadrature oracles."""

import numpy as np
import pytest

from obstacleflow.elastica import (DomainError, G, G_inv, U0,
                                   blowup_threshold, c0, cone_energy_floor,
                                   constants, critical_residual, hyp2f1,
                                   midpoint_sup, midpoint_value, sample_u_c,
                                   u_c, u_c_slope)
from obstacleflow.energy import elastic_spec, energy
from obstacleflow.gridspace import Grid

from oracles import (gamma_c0, mp_G, mp_G_inv, mp_hyp2f1, mp_midpoint_value,
                     mp_u_c, quad_c0)


def test_c0_gamma_vs_quadrature():
    assert abs(gamma_c0() - quad_c0()) <= 1e-9
    assert c0() == pytest.approx(gamma_c0(), abs=1e-12)


def test_two_over_c0_range():
    assert 0.824 <= 2.0 / c0() <= 0.845


def test_G_against_quadrature():
    for z in (0.03, 0.5, 1.0, 2.0, 7.0, 40.0, 300.0):
        assert G(z) == pytest.approx(mp_G(z), abs=5e-13)
        assert G(-z) == pytest.approx(-mp_G(z), abs=5e-13)
    assert G(0.0) == 0.0


def test_G_vectorized_and_monotone():
    z = np.linspace(-30.0, 30.0, 401)
    vals = G(z)
    assert vals.shape == z.shape
    assert np.all(np.diff(vals) > 0.0)
    assert np.abs(vals).max() < c0() / 2.0


def test_G_inv_round_trip():
    ys = np.array([-1.19, -0.9, -0.3, 0.0, 0.2, 0.8, 1.1, 1.19])
    zs = G_inv(ys)
    assert np.abs(G(zs) - ys).max() <= 1e-12
    for y in (0.4, 1.0, 1.15):
        assert float(G_inv(y)) == pytest.approx(mp_G_inv(y), rel=1e-11)


def test_G_inv_domain():
    with pytest.raises(DomainError):
        G_inv(c0() / 2.0)
    with pytest.raises(DomainError):
        G_inv(-c0())


def test_G_inv_frozen_threshold_point():
    assert float(G_inv(c0() / np.sqrt(6.0))) == pytest.approx(
        1.920941898020758, abs=1e-12)


def test_hyp2f1_against_mpmath():
    cases = [(1.0, 1.5, 1.75, -0.3), (0.5, 1.0, 0.75, -4.0),
             (1.0, 1.5, 1.75, -100.0), (0.5, 1.0, 0.75, -0.01),
             (0.25, 1.25, 2.5, -0.999), (2.0, 0.5, 3.5, -2500.0)]
    for a, b, c, z in cases:
        assert hyp2f1(a, b, c, z) == pytest.approx(
            mp_hyp2f1(a, b, c, z), rel=1e-12)
    assert hyp2f1(1.0, 1.5, 1.75, 0.0) == 1.0
    # the negative-argument evaluator rejects what it cannot certify
    with pytest.raises(ValueError):
        hyp2f1(1.0, 1.5, 1.75, 0.4)
    with pytest.raises(ValueError):
        hyp2f1(1.0, 1.5, -2.0, -0.4)


def test_u_c_closed_form_values():
    for c in (0.5, 1.3, 2.0):
        for x in (0.1, 0.25, 0.5, 0.9):
            assert u_c(c, x) == pytest.approx(mp_u_c(c, x), rel=1e-10)
    # frozen spot value
    assert u_c(2.0, 0.5) == pytest.approx(0.342196264013652, abs=1e-12)


def test_u_c_symmetry_and_slope():
    c = 1.7
    xs = np.linspace(0.0, 1.0, 41)
    vals = u_c(c, xs)
    assert np.abs(vals - vals[::-1]).max() <= 1e-12
    assert vals[0] == pytest.approx(0.0, abs=1e-12)
    # slope is the inverse-G profile, and vanishes at the midpoint
    assert u_c_slope(c, 0.5) == pytest.approx(0.0, abs=1e-14)
    h = 1e-6
    mid = (u_c(c, 0.3 + h) - u_c(c, 0.3 - h)) / (2 * h)
    assert mid == pytest.approx(float(u_c_slope(c, 0.3)), rel=1e-7)


def test_u_c_domain():
    with pytest.raises(DomainError):
        u_c(c0(), 0.5)
    with pytest.raises(DomainError):
        u_c(0.0, 0.5)
    with pytest.raises(ValueError):
        u_c(1.0, 1.5)


def test_U0_envelope():
    assert U0(0.0) == 0.0 and U0(1.0) == 0.0
    assert U0(0.5) == pytest.approx(2.0 / c0(), abs=1e-13)
    assert U0(0.25) == pytest.approx(0.7532164316991597, abs=1e-12)
    # u_c increases toward the envelope pointwise as c -> c0
    xs = np.linspace(0.05, 0.95, 19)
    lo = u_c(1.0, xs)
    hi = u_c(2.3, xs)
    env = U0(xs)
    assert np.all(lo < hi + 1e-12)
    assert np.all(hi < env + 1e-12)


def test_midpoint_value_against_mpmath():
    for B in (0.1, 1.0, 10.0, 250.0):
        assert midpoint_value(B) == pytest.approx(
            mp_midpoint_value(B), rel=1e-11)


def test_midpoint_sup_identity():
    # the supremum over tip slopes reproduces 2/c0 (hypergeometric identity)
    assert abs(midpoint_sup() - 2.0 / c0()) <= 1e-3
    assert midpoint_sup() == pytest.approx(0.8346254892374015, abs=1e-12)
    detail = midpoint_sup(detail=True)
    assert detail["monotone"]
    assert detail["mode"] == "edge-extrapolated"


def test_blowup_threshold_composition():
    t = blowup_threshold()
    assert t == pytest.approx(8.0 / c0(), abs=1e-12)
    assert t >= 4.0 * midpoint_sup()
    assert t >= float(G_inv(c0() / np.sqrt(6.0)))
    assert t == pytest.approx(3.3385073666962937, abs=1e-12)


def test_cone_energy_floor():
    # touching a cone flank forces four quarter-turns of G-variation G(A)
    A, a = 2.0, 0.25
    gA = float(G(A))
    assert cone_energy_floor(A, a) == pytest.approx(
        4.0 * gA * gA * 2.0, rel=1e-12)
    with pytest.raises(ValueError):
        cone_energy_floor(-1.0, 0.25)
    with pytest.raises(ValueError):
        cone_energy_floor(1.0, 0.6)


def test_critical_residual_small_on_family():
    grid = Grid(1024)
    u = sample_u_c(grid, 1.5)
    # the family satisfies the free elastica equation; the discrete residual
    # shrinks with the grid
    r_fine = critical_residual(u)
    r_coarse = critical_residual(sample_u_c(Grid(128), 1.5))
    # second-order convergence: refining 8x shrinks the residual ~64x
    assert r_fine <= r_coarse / 32.0
    assert r_fine <= 1e-5


def test_sampled_energy_matches_c_squared():
    grid = Grid(2048)
    spec = elastic_spec()
    for c in (0.5, 1.0, 2.0):
        E = energy(spec, sample_u_c(grid, c))
        assert abs(E / (c * c) - 1.0) <= 2e-3


def test_constants_dict():
    d = constants()
    assert d["c0"] == pytest.approx(c0(), abs=0.0)
    assert d["two_over_c0"] == pytest.approx(2.0 / c0(), abs=1e-15)
    for key in ("c0", "two_over_c0", "midpoint_sup", "blowup_threshold",
                "c0_squared", "four_thirds_c0_squared"):
        assert key in d
