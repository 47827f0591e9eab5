import numpy as np
import pytest

from opinionflow.common import ConfigError
from opinionflow.generators import (
    community_features,
    generate_bench_graph,
    generate_sbm,
    heterophily_labels,
    influence_features,
)
from opinionflow.graph import build_graph


def test_sbm_balanced_communities():
    g, labels = generate_sbm(23, 5, 0.5, 0.05, seed=1)
    assert g.n == 23
    assert np.bincount(labels).tolist() == [5, 5, 5, 4, 4]


def test_sbm_extremes():
    g, labels = generate_sbm(12, 3, 1.0, 0.0, seed=2)
    assert g.m == 3 * 6
    u, v = g.edges.T
    assert np.all(labels[u] == labels[v])

    empty, _ = generate_sbm(10, 2, 0.0, 0.0, seed=2)
    assert empty.m == 0


def test_sbm_is_seeded():
    a, _ = generate_sbm(30, 3, 0.4, 0.1, seed=8)
    b, _ = generate_sbm(30, 3, 0.4, 0.1, seed=8)
    assert np.array_equal(a.edges, b.edges)


def test_sbm_errors():
    with pytest.raises(ConfigError):
        generate_sbm(3, 4, 0.5, 0.1)
    with pytest.raises(ConfigError):
        generate_sbm(10, 2, 0.1, 0.5)


def test_bench_graph_edge_count():
    assert generate_bench_graph(100, 250, seed=0).m == 250
    with pytest.raises(ConfigError):
        generate_bench_graph(4, 7)


def test_features():
    x = community_features([0, 1, 1], noise=0.0)
    assert x.tolist() == [[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]
    g = build_graph([(0, 1), (1, 2), (1, 3)], 4)
    f = influence_features(g, [3])
    assert f[:, 0].tolist() == [0.0, 0.0, 0.0, 1.0]
    assert f[1, 1] == 1.0 and f[0, 1] == pytest.approx(1.0 / 3.0)


def test_heterophily_labels_alternate_on_a_path():
    g = build_graph([(0, 1), (1, 2), (2, 3), (3, 4)], 5)
    labels = heterophily_labels(g, [0, 0, 0, 1, 1])
    assert labels.tolist() == [0, 1, 0, 2, 3]


def test_heterophily_labels_color_each_community_tree():
    g = build_graph([(0, 1), (0, 2), (0, 3), (3, 4), (4, 5), (5, 6)], 7)
    communities = [0, 0, 0, 0, 1, 1, 1]
    labels = heterophily_labels(g, communities)
    assert labels.tolist() == [0, 1, 1, 1, 2, 3, 2]
    u, v = g.edges.T
    same = np.asarray(communities)[u] == np.asarray(communities)[v]
    assert np.all(labels[u][same] != labels[v][same])
