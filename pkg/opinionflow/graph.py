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
Sparse undirected graphs and the structural operators built on them.

Sparse matrices are plain ``scipy.sparse.csr_matrix`` objects with sorted,
duplicate-free column indices. Feature matrices are dense ``float64``
numpy arrays of shape (n, d).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .common import GraphError, ShapeError, StochasticityError, issue


@dataclass(frozen=True)
class Graph:
    """
    Immutable undirected graph.

    ``edges`` holds each undirected edge once as a (u, v) row with u < v,
    sorted lexicographically. ``csr`` is the symmetric 0/1 adjacency and
    ``degrees`` the per-node neighbor counts.
    """

    n: int
    edges: np.ndarray
    csr: sp.csr_matrix
    degrees: np.ndarray

    @property
    def m(self):
        return len(self.edges)

    def neighbors(self, i):
        return self.csr.indices[self.csr.indptr[i] : self.csr.indptr[i + 1]]

    def is_connected(self):
        if self.n == 1:
            return True
        num, _ = connected_components(self.csr, directed=False)
        return num == 1


def build_graph(edge_list, n):
    """Build a deduplicated, symmetric, self-loop-free graph from (u, v) pairs."""
    if n is None or int(n) <= 0:
        issue("A graph needs at least one node (got n={}).".format(n), "error", GraphError)
    n = int(n)

    pairs = np.asarray(list(edge_list), dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        bad = pairs[(pairs < 0).any(axis=1) | (pairs >= n).any(axis=1)][0]
        issue(
            "Edge ({}, {}) has an endpoint outside [0, {}).".format(bad[0], bad[1], n),
            "error",
            GraphError,
        )

    pairs = pairs[pairs[:, 0] != pairs[:, 1]]  # Self-influence is not an edge.
    pairs = np.sort(pairs, axis=1)
    pairs = np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)

    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adj = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.float64), (rows, cols)), shape=(n, n)
    )
    adj.sum_duplicates()
    adj.sort_indices()
    degrees = np.diff(adj.indptr).astype(np.int64)

    return Graph(n=n, edges=pairs, csr=adj, degrees=degrees)


def row_ids(mat):
    """Row index of every stored entry of a CSR matrix."""
    return np.repeat(np.arange(mat.shape[0]), np.diff(mat.indptr))


def normalized_laplacian(g):
    """
    Symmetric normalized Laplacian I - D^-1/2 A D^-1/2.
    Isolated nodes get an all-zero row (their diagonal is 0, not 1).
    """
    deg = g.degrees.astype(np.float64)
    dinv_sqrt = np.zeros(g.n)
    nz = deg > 0
    dinv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    scale = sp.diags(dinv_sqrt)
    lap = sp.diags(nz.astype(np.float64)) - scale @ g.csr @ scale
    lap = sp.csr_matrix(lap)
    lap.sum_duplicates()
    lap.eliminate_zeros()
    lap.sort_indices()
    return lap


def uniform_row_stochastic(g, self_weight=0.0):
    """
    Row-stochastic influence matrix spreading ``1 - self_weight`` uniformly
    over each node's neighbors. Isolated nodes keep all their mass on the
    diagonal, which needs ``self_weight > 0``.
    """
    if not 0.0 <= self_weight < 1.0:
        issue(
            "self_weight must lie in [0, 1) (got {}).".format(self_weight),
            "error",
            StochasticityError,
        )
    isolated = g.degrees == 0
    if self_weight == 0.0 and isolated.any():
        issue(
            "Node {} is isolated, so a row-stochastic W needs self_weight > 0.".format(
                int(np.flatnonzero(isolated)[0])
            ),
            "error",
            StochasticityError,
        )

    deg = np.maximum(g.degrees, 1).astype(np.float64)
    rows = row_ids(g.csr)
    off = sp.csr_matrix(
        ((1.0 - self_weight) / deg[rows], g.csr.indices.copy(), g.csr.indptr.copy()),
        shape=(g.n, g.n),
    )
    if self_weight > 0.0:
        diag = np.where(isolated, 1.0, self_weight)
        w = sp.csr_matrix(off + sp.diags(diag))
    else:
        w = off
    w.sum_duplicates()
    w.sort_indices()
    return w


def norm_1_inf(mat):
    """Return (max column abs sum, max row abs sum) in one pass over the stored entries."""
    mat = sp.csr_matrix(mat)
    if mat.nnz == 0:
        return 0.0, 0.0
    absval = np.abs(mat.data)
    col_sums = np.bincount(mat.indices, weights=absval, minlength=mat.shape[1])
    row_sums = np.bincount(row_ids(mat), weights=absval, minlength=mat.shape[0])
    return float(col_sums.max()), float(row_sums.max())


def spmm(mat, x):
    """Sparse times dense. Each output row is accumulated in stored column order."""
    x = np.asarray(x, dtype=np.float64)
    if mat.shape[1] != x.shape[0]:
        issue(
            "Cannot multiply a {}x{} matrix by {} feature rows.".format(
                mat.shape[0], mat.shape[1], x.shape[0]
            ),
            "error",
            ShapeError,
        )
    return np.asarray(mat @ x)


def check_features(x, what="feature matrix"):
    """Coerce to a 2-D float64 array and refuse NaN/Inf entries."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        issue("The {} must be 2-D.".format(what), "error", ShapeError)
    if not np.all(np.isfinite(x)):
        issue("The {} has non-finite entries.".format(what), "error", ShapeError)
    return x


def check_row_stochastic(w, tol=1e-9):
    """Raise unless every row of ``w`` sums to 1 within ``tol``."""
    sums = np.asarray(w.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if len(bad):
        issue(
            "Row {} of the influence matrix sums to {!r}, not 1.".format(
                int(bad[0]), float(sums[bad[0]])
            ),
            "error",
            StochasticityError,
        )


def influence_pattern(g):
    """
    CSR pattern of every slot an influence matrix may use: all adjacency
    entries plus the full diagonal. Values are 1.
    """
    pattern = sp.csr_matrix(g.csr + sp.identity(g.n, format="csr"))
    pattern.data[:] = 1.0
    pattern.sum_duplicates()
    pattern.sort_indices()
    return pattern


def on_pattern(mat, pattern):
    """Values of ``mat`` at each stored slot of ``pattern`` (0 where ``mat`` has none)."""
    rows = row_ids(pattern)
    return np.asarray(sp.csr_matrix(mat)[rows, pattern.indices]).ravel()


def edge_homophily(g, labels):
    """Fraction of edges whose endpoints share a label (nan for an edgeless graph)."""
    if g.m == 0:
        return float("nan")
    labels = np.asarray(labels)
    return float(np.mean(labels[g.edges[:, 0]] == labels[g.edges[:, 1]]))
