import numpy as np
import pytest

from instantiation_net.graph.mesh import Mesh
from instantiation_net.sampling.hierarchy import build_hierarchy
from instantiation_net.synthetic.shapes import icosphere


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running training or full-scale checks')


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def triangle():
    return Mesh.create([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


@pytest.fixture
def tetrahedron():
    return Mesh.create(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
        [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )


@pytest.fixture
def octahedron():
    return Mesh.create(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
        [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]],
    )


@pytest.fixture(scope='session')
def ico162():
    return icosphere(subdivisions=2, radius=30.0)


@pytest.fixture(scope='session')
def desk_hierarchy(ico162):
    return build_hierarchy(ico162, stride=3)
