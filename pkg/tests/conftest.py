import numpy as np
import pytest

from ftnlim.pulse import make_rrc, make_sinc
from ftnlim.channel import make_channel


@pytest.fixture(scope="session")
def rrc1():
    """Unit-roll-off RRC at its tightest leakage-feasible truncation."""
    return make_rrc(1.0, 0.5, 8.57)


@pytest.fixture(scope="session")
def rrc05():
    return make_rrc(0.5, 0.5, 10.52)


@pytest.fixture(scope="session")
def sinc():
    return make_sinc(0.5)


@pytest.fixture(scope="session")
def small_channel(rrc1):
    """A compact operating point shared by the bound tests."""
    return make_channel(rrc1, 40.0, 10.0, 0.6)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260822)
