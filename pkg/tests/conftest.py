import numpy as np
import pytest

from harmonikos import get_algebra, make_prepotential, reconstruct
from harmonikos.flatspace import real_to_x
from harmonikos.harmonics import random_su2

# weak non-commuting example used across the suites
SL2_EXAMPLE = "0.5*T2*xm1*xm2 + 0.4*T3*xm1^2 + 0.3*T1*xm2^2"
U1_EXAMPLE = "0.7*T1*xm1*xm2"


def points(seed, count, scale=0.5):
    rng = np.random.default_rng(seed)
    y = rng.uniform(-scale, scale, (count, 4))
    return real_to_x(y), random_su2(rng, count)


@pytest.fixture(scope="session")
def sl2():
    return get_algebra("sl2")


@pytest.fixture(scope="session")
def u1():
    return get_algebra("u1")


@pytest.fixture(scope="session")
def gd_u1(u1):
    return reconstruct(make_prepotential(U1_EXAMPLE, u1))


@pytest.fixture(scope="session")
def gd_sl2(sl2):
    return reconstruct(make_prepotential(SL2_EXAMPLE, sl2))
