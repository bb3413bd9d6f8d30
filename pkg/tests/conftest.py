import numpy as np
import pytest

from urbanretail.geometry import build_ring, build_square_torus, build_tri_torus
from urbanretail.model import RetailModel
from urbanretail.symmetry import invariant_supports, lattice_group


@pytest.fixture(scope="session")
def square6():
    return build_square_torus(6)


@pytest.fixture(scope="session")
def tri6():
    return build_tri_torus(6)


@pytest.fixture(scope="session")
def square6_group(square6):
    return lattice_group(square6)


@pytest.fixture(scope="session")
def tri6_group(tri6):
    return lattice_group(tri6)


@pytest.fixture(scope="session")
def square6_patterns(square6, square6_group):
    return invariant_supports(square6, square6_group)


@pytest.fixture(scope="session")
def tri6_patterns(tri6, tri6_group):
    return invariant_supports(tri6, tri6_group)


@pytest.fixture
def two_zone():
    return RetailModel.from_phi(build_ring(2), 1.2, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
