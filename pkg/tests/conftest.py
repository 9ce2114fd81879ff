import numpy as np
import pytest

from stochafem import meshgen
from stochafem.fem import DofMap


@pytest.fixture(scope="session")
def pylon():
    mesh = meshgen.pylon_like_mesh()
    return mesh, DofMap(mesh)


@pytest.fixture(scope="session")
def tunnel_mesh():
    return meshgen.tunnel_like_mesh()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
