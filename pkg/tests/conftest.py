import numpy as np
import pytest

from bayespsr import simulator as sim


@pytest.fixture(scope="session")
def ising5():
    return sim.build_ising(5)


@pytest.fixture(scope="session")
def su2_5_3():
    return sim.build_efficient_su2(5, 3)


@pytest.fixture(scope="session")
def ising3():
    return sim.build_ising(3)


@pytest.fixture(scope="session")
def su2_3_1():
    return sim.build_efficient_su2(3, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
