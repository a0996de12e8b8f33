import numpy as np
import pytest

from defectqoc.grape import prepare_targets
from defectqoc.problems import preset


@pytest.fixture(scope="session")
def creation():
    return preset("creation")


@pytest.fixture(scope="session")
def detachment():
    return preset("detachment")


@pytest.fixture(scope="session")
def creation_targets(creation):
    return prepare_targets(creation)


@pytest.fixture(scope="session")
def detachment_targets(detachment):
    return prepare_targets(detachment)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
