import numpy as np
import pytest

from flowloc.data_sources.graph_core import build_graph
from flowloc.data_sources.graph_gen import FamilySpec, generate


@pytest.fixture
def single_edge():
    return build_graph([(0, 1, 1.0)])


@pytest.fixture
def triangle():
    return build_graph([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


@pytest.fixture
def path4():
    return build_graph([(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def cycle4():
    return build_graph([(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture
def star5():
    return build_graph([(0, v) for v in range(1, 5)])


@pytest.fixture
def parallel_pair():
    return build_graph([(0, 1, 1.0), (0, 1, 3.0)])


@pytest.fixture
def weighted_gnp():
    return generate(FamilySpec(family="gnp", n=10, conductance="weighted", seed=11))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240607))
