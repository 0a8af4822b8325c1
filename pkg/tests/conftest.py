import math

import numpy as np
import pytest

from inspectplan.bridge import generate_bridge
from inspectplan.mesh import TriMesh
from inspectplan.paths import SpanTemplate
from inspectplan.viewpoints import GridSpec, build_graph
from inspectplan.visibility import VisibilityParams, compute_visibility

CUBE_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # z = lo
    [4, 5, 6], [4, 6, 7],  # z = hi
    [0, 1, 5], [0, 5, 4],  # y = lo
    [2, 3, 7], [2, 7, 6],  # y = hi
    [1, 2, 6], [1, 6, 5],  # x = hi
    [0, 4, 7], [0, 7, 3],  # x = lo
])


def make_cube(lo=0.0, size=1.0):
    lo = np.broadcast_to(np.asarray(lo, float), (3,))
    corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float)
    return TriMesh(lo + size * corners, CUBE_FACES)


@pytest.fixture(scope="session")
def cube():
    """Unit cube centred on the middle lattice point of a 5x5x5 grid."""
    return make_cube(1.5)


@pytest.fixture(scope="session")
def cube_grid():
    return GridSpec((0.0, 0.0, 0.0), (4.0, 4.0, 4.0), 1.0)


@pytest.fixture(scope="session")
def cube_graph(cube, cube_grid):
    return build_graph(cube_grid, [cube], 0.5)


@pytest.fixture(scope="session")
def cube_vm(cube, cube_graph):
    return compute_visibility(cube_graph, cube, VisibilityParams())


@pytest.fixture(scope="session")
def bridge():
    return generate_bridge()


@pytest.fixture(scope="session")
def bridge_graph(bridge):
    lo, hi = bridge.mesh.bounds
    return build_graph(GridSpec.around(lo, hi, 1.0, 3.0, z_floor=0.5), [bridge.mesh], 0.5)


@pytest.fixture(scope="session")
def bridge_vm(bridge, bridge_graph):
    return compute_visibility(bridge_graph, bridge.mesh, VisibilityParams())


@pytest.fixture(scope="session")
def bridge_template(bridge):
    iv = bridge.span_intervals()
    spans = [(-math.inf if k == 0 else a, math.inf if k == len(iv) - 1 else b)
             for k, (a, b) in enumerate(iv)]
    return SpanTemplate(tuple(spans), bridge.deck_top, 1)
