import numpy as np
import pytest

from attractlab import endo


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pow2():
    return endo.pow_map(2)


@pytest.fixture(scope="session")
def lin():
    def make(eps):
        return endo.instantiate_family(endo.FamilySpec("LIN"), eps)
    return make


@pytest.fixture(scope="session")
def sinks():
    return endo.instantiate_family(endo.FamilySpec("SINKS"))
