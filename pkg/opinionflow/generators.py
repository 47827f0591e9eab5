# MIT license
#
# Copyright (C) 2024-2025 by the opinionflow developers.
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN
# THE SOFTWARE.

"""
Synthetic graphs and the node features/labels built on them.
"""

import networkx as nx
import numpy as np

from .common import ConfigError, issue
from .graph import build_graph


def _from_networkx(nxg, n):
    return build_graph(list(nxg.edges()), n)


def generate_sbm(n, k, p_in, p_out, seed=None):
    """
    Stochastic block model with ``k`` balanced communities (sizes differ by
    at most one, larger ones first). Returns (Graph, community labels).
    """
    if int(k) < 1 or int(n) < 1 or k > n:
        issue("Need 1 <= k <= n (got n={}, k={}).".format(n, k), "error", ConfigError, field="k")
    if not 0.0 <= p_out <= p_in <= 1.0:
        issue(
            "Need 0 <= p_out <= p_in <= 1 (got p_in={}, p_out={}).".format(p_in, p_out),
            "error",
            ConfigError,
            field="p_in" if not 0.0 <= p_in <= 1.0 else "p_out",
        )
    base, extra = divmod(int(n), int(k))
    sizes = [base + 1 if c < extra else base for c in range(k)]
    nxg = nx.random_partition_graph(sizes, p_in, p_out, seed=seed)
    labels = np.repeat(np.arange(k), sizes)
    return _from_networkx(nxg, n), labels


def generate_bench_graph(n, m, seed=None):
    """Uniform random graph with exactly ``m`` edges."""
    if m > n * (n - 1) // 2:
        issue("{} nodes cannot hold {} edges.".format(n, m), "error", ConfigError, field="m")
    return _from_networkx(nx.gnm_random_graph(n, m, seed=seed), n)


def community_features(labels, noise=0.1, rng=None):
    """One-hot community indicators plus Gaussian noise."""
    rng = np.random.default_rng(rng)
    labels = np.asarray(labels, dtype=np.int64)
    onehot = np.eye(labels.max() + 1)[labels]
    return onehot + noise * rng.standard_normal(onehot.shape)


def influence_features(g, seeds):
    """Seed indicator and degree scaled to [0, 1]."""
    x = np.zeros((g.n, 2))
    x[np.asarray(seeds, dtype=np.int64), 0] = 1.0
    top = g.degrees.max()
    if top > 0:
        x[:, 1] = g.degrees / top
    return x


def heterophily_labels(g, communities):
    """
    Two-color each community by BFS depth parity inside it, so neighbors in
    a community mostly get different colors. Returns 2 * community + color.
    """
    communities = np.asarray(communities, dtype=np.int64)
    inner = nx.Graph()
    inner.add_nodes_from(range(g.n))
    inner.add_edges_from((int(u), int(v)) for u, v in g.edges if communities[u] == communities[v])
    color = np.zeros(g.n, dtype=np.int64)
    for component in nx.connected_components(inner):
        for u, v in nx.bfs_edges(inner, min(component)):
            color[v] = 1 - color[u]
    return 2 * communities + color
