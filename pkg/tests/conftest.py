import pytest

from wvasim.config import OpticalSetup
from wvasim.simulation import Simulator


@pytest.fixture(scope="session")
def setup16():
    return OpticalSetup().with_betas(1.6)


@pytest.fixture(scope="session")
def sim16(setup16):
    return Simulator(setup16)


@pytest.fixture(scope="session")
def sim45():
    return Simulator(OpticalSetup().with_betas(45.0))


@pytest.fixture(scope="session")
def sim_by_beta():
    return {b: Simulator(OpticalSetup().with_betas(b)) for b in (1.6, 3.3, 6.6, 45.0)}
