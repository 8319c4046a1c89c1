import numpy as np
import pytest

from qgap.model import build_tfim
from qgap.spectral import FilterSpec, TimeGrid

# N=5, J/h=0.4 first gap from numpy's LAPACK eigvalsh (independent of the in-repo solver)
DELTA_EXACT_N5 = 1.340771376898239


@pytest.fixture(scope="session")
def model5():
    return build_tfim(5, 0.4, 1.0)


@pytest.fixture(scope="session")
def default_grid():
    return TimeGrid.for_filter(0.3)


@pytest.fixture(scope="session")
def lorentzian():
    return FilterSpec("lorentzian", 0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)
