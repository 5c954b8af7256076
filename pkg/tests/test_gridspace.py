"""Grid, GridFunction, and H-metric behavior against dense oracles."""

import numpy as np
import pytest

from obstacleflow.gridspace import (Grid, GridFunction, GridMismatchError,
                                    embedding_constant, first_diff_sup,
                                    h_inner, h_norm, metric_for, reflect,
                                    riesz_representer, second_diff)

from oracles import dense_embedding_constant, dense_gram, dense_h_inner, smooth


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(4)
    with pytest.raises(TypeError):
        Grid(8.0)
    g = Grid(8)
    assert g.h == 0.125
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert g.nodes.size == 9


def test_gridfunction_contract(grid64):
    vals = np.zeros(65)
    vals[1] = 1.0
    u = GridFunction(grid64, vals)
    with pytest.raises(AttributeError):
        u.values = vals
    with pytest.raises(ValueError):
        u.values[1] = 2.0
    bad = np.ones(65)
    with pytest.raises(ValueError):
        GridFunction(grid64, bad)
    with pytest.raises(ValueError):
        GridFunction(grid64, np.zeros(64))
    nan = np.zeros(65)
    nan[3] = np.nan
    with pytest.raises(ValueError):
        GridFunction(grid64, nan)


def test_interior_round_trip(grid64, rng):
    u = smooth(grid64, rng)
    v = GridFunction.from_interior(grid64, u.interior)
    assert np.array_equal(u.values, v.values)


def test_h_inner_matches_dense(grid64, rng):
    u = smooth(grid64, rng)
    v = smooth(grid64, rng, amp=0.3, modes=9)
    want = dense_h_inner(u, v)
    got = h_inner(u, v)
    assert abs(got - want) <= 1e-12 * (1.0 + abs(want))
    assert abs(h_norm(u) ** 2 - dense_h_inner(u, u)) <= 1e-12


def test_h_inner_grid_mismatch(grid64, rng):
    u = smooth(grid64, rng)
    v = smooth(Grid(32), rng)
    with pytest.raises(GridMismatchError):
        h_inner(u, v)


def test_second_diff_endpoints(grid64, rng):
    u = smooth(grid64, rng)
    d = second_diff(u)
    assert d.shape == (grid64.n - 1,)
    h = grid64.h
    j = 10
    want = (u.values[j + 1] - 2 * u.values[j] + u.values[j - 1]) / h**2
    assert abs(d[j - 1] - want) <= 1e-9 * (1 + abs(want))


def test_first_diff_sup(grid64):
    u = GridFunction.from_callable(grid64, lambda x: x * (1.0 - x))
    # forward differences of x(1-x) peak at the boundary cells
    want = np.abs(np.diff(u.values)).max() / grid64.h
    assert first_diff_sup(u) == pytest.approx(want, rel=1e-14)


def test_reflect_involution(grid64, rng):
    u = smooth(grid64, rng)
    r = reflect(u)
    assert np.array_equal(r.values, u.values[::-1])
    assert np.array_equal(reflect(r).values, u.values)


def test_metric_apply_matches_dense(grid64, rng):
    metric = metric_for(grid64)
    A = dense_gram(grid64)
    x = rng.standard_normal(grid64.n - 1)
    got = metric.apply(x)
    want = A @ x
    assert np.abs(got - want).max() <= 1e-9 * (1.0 + np.abs(want).max())


def test_metric_solve_inverts(grid64, rng):
    metric = metric_for(grid64)
    b = rng.standard_normal(grid64.n - 1)
    x = metric.solve(b)
    r = b - metric.apply(x)
    assert metric.dual_norm(r) <= 1e-10 * (1.0 + metric.norm(x))


def test_metric_cache_shared(grid64):
    assert metric_for(grid64) is metric_for(Grid(64))


def test_embedding_constant_dense(grid64):
    want = dense_embedding_constant(grid64)
    assert embedding_constant(grid64) == pytest.approx(want, rel=1e-10)


def test_embedding_constant_frozen_256(grid256):
    # dense-oracle value, frozen; the continuum Poincare-type constant
    assert embedding_constant(grid256) == pytest.approx(
        0.5756585370523168, abs=1e-12)


def test_embedding_inequality(grid64, rng):
    # the constant bounds the discrete slope sup by the H-norm
    C = embedding_constant(grid64)
    for _ in range(5):
        u = smooth(grid64, rng, amp=float(rng.uniform(0.1, 3.0)))
        assert first_diff_sup(u) <= C * h_norm(u) * (1.0 + 1e-12)


def test_riesz_representer(grid64, rng):
    b = rng.standard_normal(grid64.n - 1)
    g = riesz_representer(grid64, b)
    v = smooth(grid64, rng)
    # (g, v)_H = b . v_interior for every v
    assert h_inner(g, v) == pytest.approx(float(b @ v.interior),
                                          rel=1e-9, abs=1e-9)
