import numpy as np
import pytest

from mdla.kernels import build_kernel_table


@pytest.fixture(scope="session")
def table01():
    """Shared kernel table at alpha = 0.1 (the workhorse test alpha)."""
    return build_kernel_table(0.1)


@pytest.fixture(scope="session")
def table005():
    return build_kernel_table(0.05)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
