"""Shared fixtures: small grids and shell calculi reused across modules."""

import numpy as np
import pytest

from eulerfourier.grid import PeriodicGrid
from eulerfourier.littlewood import LittlewoodPaley


@pytest.fixture(scope="session")
def grid1d():
    return PeriodicGrid(dim=1, npts=256, length=16.0 * np.pi)


@pytest.fixture(scope="session")
def lp1d(grid1d):
    return LittlewoodPaley(grid1d)


@pytest.fixture(scope="session")
def grid2d():
    return PeriodicGrid(dim=2, npts=64, length=8.0 * np.pi)


@pytest.fixture(scope="session")
def lp2d(grid2d):
    return LittlewoodPaley(grid2d)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
