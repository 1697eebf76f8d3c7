import numpy as np
import pytest

from deepgraph import _accel, datasets
from deepgraph.graph import Graph, path_graph

ACCEPTANCE_LINES = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    before = _accel.USE_NUMBA
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    _accel.set_backend(request.param == "numba")
    yield request.param
    _accel.set_backend(before)


@pytest.fixture
def p4():
    return path_graph(4)


@pytest.fixture
def small_graph():
    """Two triangles joined by a bridge plus an isolated node."""
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]
    rng = np.random.default_rng(3)
    return Graph.from_edges(
        7,
        edges,
        features=rng.normal(size=(7, 4)),
        labels=np.array([0, 0, 0, 1, 1, 1, 0]),
        num_classes=2,
    )


@pytest.fixture
def er_graph():
    g = datasets.erdos_renyi(40, 0.15, seed=11, feature_dim=6, num_classes=3)
    return g.replace(train_mask=np.ones(g.num_nodes, dtype=bool))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
