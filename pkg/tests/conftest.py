import numpy as np
import pytest

from graphdiv.encoder import TrainConfig
from graphdiv.graphs import Graph


@pytest.fixture
def tiny_cfg():
    """Small but nontrivial training config for fast unit tests."""
    return TrainConfig(embed_dim=4, encoding_epochs=40, scoring_epochs=40, rng_seed=0)


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def labeled_pair():
    """Two 6-node labeled graphs sharing both vocabularies."""
    edges1 = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]
    edges2 = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)]
    g1 = Graph(6, edges1, node_labels=[0, 1, 0, 1, 0, 1],
               edge_labels=[0, 1, 2, 0, 1, 2, 0], num_node_labels=2, num_edge_labels=3)
    g2 = Graph(6, edges2, node_labels=[1, 0, 1, 0, 1, 0],
               edge_labels=[2, 1, 0, 2, 1, 0], num_node_labels=2, num_edge_labels=3)
    return g1, g2


def assert_close(a, b, tol=1e-9):
    assert abs(float(a) - float(b)) <= tol, f"{a} != {b} (tol {tol})"
