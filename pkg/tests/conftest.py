import numpy as np
import pytest

from nselab import default_partition, make_grid


@pytest.fixture(scope="session")
def grid16():
    return make_grid(3, 16, 2.0 * np.pi)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(3, 32, 2.0 * np.pi)


@pytest.fixture(scope="session")
def grid2d():
    return make_grid(2, 32, 2.0 * np.pi)


@pytest.fixture(scope="session")
def part16(grid16):
    return default_partition(grid16)


@pytest.fixture(scope="session")
def part32(grid32):
    return default_partition(grid32)
