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
Random graphs, influence matrices and diffusion parameters for the tests.
"""

import numpy as np
import scipy.sparse as sp

from opinionflow.diffusion import DiffusionParams, combined_matrix, op_norm_bound
from opinionflow.graph import build_graph, influence_pattern, row_ids


def random_graph(n, p, rng, connected=True):
    """Erdos-Renyi edges, plus a random spanning path when ``connected``."""
    upper = np.triu(rng.random((n, n)) < p, k=1)
    edges = list(zip(*np.nonzero(upper)))
    if connected and n > 1:
        order = rng.permutation(n)
        edges += list(zip(order[:-1], order[1:]))
    return build_graph(edges, n)


def random_row_stochastic(g, rng, self_loops=True):
    """Random positive weights on the adjacency (and diagonal), rows normalized."""
    pattern = influence_pattern(g) if self_loops else g.csr
    data = rng.random(pattern.nnz) + 0.05
    rows = row_ids(pattern)
    data /= np.bincount(rows, weights=data, minlength=g.n)[rows]
    return sp.csr_matrix((data, pattern.indices.copy(), pattern.indptr.copy()), shape=pattern.shape)


def contractive_params(g, w, lg, rng, steps, alpha=None, target=0.9):
    """Random parameters, with stubbornness raised until the norm bound is at most ``target``."""
    lam = rng.uniform(0.1, 0.9, g.n)
    mu = rng.uniform(0.0, 0.3)
    alpha = rng.uniform(0.0, 0.9) if alpha is None else alpha
    while True:
        params = DiffusionParams(alpha=alpha, lam=lam, mu=mu, steps=steps)
        if op_norm_bound(combined_matrix(w, lg, params)) <= target:
            return params
        lam = 1.0 - 0.8 * (1.0 - lam)


def random_sparse(n, density, rng):
    """Random signed sparse matrix (for norm-bound checks)."""
    mat = sp.random(n, n, density=density, random_state=rng, format="csr")
    mat.data = rng.standard_normal(mat.nnz)
    return mat
