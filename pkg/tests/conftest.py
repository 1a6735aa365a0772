import numpy as np
import pytest

from aflab import constellation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def qpsk():
    return constellation.make_qam(4)


@pytest.fixture(scope="session")
def qam16():
    return constellation.make_qam(16)


@pytest.fixture(scope="session")
def two_ring():
    return constellation.make_two_ring(np.sqrt(1 / 3), np.sqrt(7), 0.9, 8)


def complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
