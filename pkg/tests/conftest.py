"""Shared fixtures: grids, random data, and session-scoped preset flows."""

import numpy as np
import pytest

from obstacleflow.engine import run_flow
from obstacleflow.gridspace import Grid
from obstacleflow.presets import build_preset


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


@pytest.fixture
def grid8():
    return Grid(8)


@pytest.fixture
def grid64():
    return Grid(64)


@pytest.fixture
def grid256():
    return Grid(256)


# The preset trajectories are expensive (the blow-up run integrates to
# T = 4000); session scope shares one run across every test that needs it.


@pytest.fixture(scope="session")
def subconverge_traj():
    return run_flow(build_preset("subconverge").config)


@pytest.fixture(scope="session")
def unconstrained_traj():
    return run_flow(build_preset("unconstrained").config)


@pytest.fixture(scope="session")
def blowup_traj():
    return run_flow(build_preset("blowup").config)


@pytest.fixture(scope="session")
def blowup_short_traj():
    """A 250-step slice of the blow-up preset for per-step suites."""
    return run_flow(build_preset("blowup", T=25.0).config)
