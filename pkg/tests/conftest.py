import numpy as np
import pytest

from seqdpd.constellation import builtin_constellation


@pytest.fixture(scope="session")
def cross128():
    return builtin_constellation("cross-qam128")


@pytest.fixture(scope="session")
def qpsk():
    return builtin_constellation("qpsk")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
