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
Classify where a diffusion settled (one consensus, several, or one value
per node) and check which consensus guarantees the parameters satisfy.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .diffusion import combined_matrix, op_norm_bound

SINGLE = "single"
MULTI = "multi"
INDIVIDUALIZED = "individualized"
NOT_CONVERGED = "not_converged"

CLUSTER_TOL = 1e-5
INDIVIDUAL_LAMBDA = 0.95
PARAM_DIFF_TOL = 1e-9


class UnionFind(object):
    """Union by rank with path compression over the integers 0..n-1."""

    def __init__(self, n):
        self._leader = np.arange(n)
        self._rank = np.zeros(n, dtype=np.int64)
        self.n_clusters = n

    def find(self, s):
        root = s
        while self._leader[root] != root:
            root = self._leader[root]
        while self._leader[s] != root:
            self._leader[s], s = root, self._leader[s]
        return root

    def union(self, a, b):
        s1, s2 = self.find(a), self.find(b)
        if s1 == s2:
            return
        if self._rank[s2] > self._rank[s1]:
            s1, s2 = s2, s1
        if self._rank[s1] == self._rank[s2]:
            self._rank[s1] += 1
        self._leader[s2] = s1
        self.n_clusters -= 1

    def roots(self):
        return np.array([self.find(s) for s in range(len(self._leader))])


@dataclass
class ConsensusReport:
    kind: str
    k: int
    assignments: np.ndarray
    values: np.ndarray
    tolerance: float = CLUSTER_TOL

    @property
    def clusters(self):
        return [np.flatnonzero(self.assignments == c).tolist() for c in range(self.k)]

    def to_dict(self):
        return {
            "kind": self.kind,
            "k": int(self.k),
            "clusters": self.clusters,
            "values": [[float(v) for v in row] for row in self.values],
        }


def classify_convergence(final_state, tol=CLUSTER_TOL, converged=True):
    """
    Group nodes whose states lie within ``tol`` of each other (transitively)
    and name the resulting configuration.

    Cluster ids are ordered by the lexicographic order of the cluster means,
    so relabeling the nodes relabels the assignments the same way.
    """
    x = np.asarray(final_state, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n = x.shape[0]

    uf = UnionFind(n)
    for i, j in cKDTree(x).query_pairs(r=tol, p=2.0, output_type="ndarray"):
        uf.union(int(i), int(j))
    roots = uf.roots()

    _, first_ids = np.unique(roots, return_inverse=True)
    k = int(first_ids.max()) + 1
    means = np.zeros((k, x.shape[1]))
    np.add.at(means, first_ids, x)
    means /= np.bincount(first_ids, minlength=k)[:, None]
    order = np.lexsort(means.T[::-1])
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(k)
    assignments = relabel[first_ids]
    values = means[order]

    if not converged:
        kind = NOT_CONVERGED
    elif k == 1:
        kind = SINGLE
    elif k == n:
        kind = INDIVIDUALIZED
    else:
        kind = MULTI
    return ConsensusReport(kind=kind, k=k, assignments=assignments, values=values, tolerance=tol)


def detect_blocks(m):
    """Connected components of the support of ``m`` treated as undirected, ordered by smallest node."""
    m = sp.csr_matrix(m, copy=True)
    m.eliminate_zeros()
    _, labels = connected_components(m, directed=True, connection="weak")
    blocks = {}
    for node, label in enumerate(labels):
        blocks.setdefault(label, []).append(node)
    return sorted((np.array(b) for b in blocks.values()), key=lambda b: b[0])


@dataclass
class ConditionCheck:
    name: str
    satisfied: bool
    expected_kind: str = None
    expected_k: int = None
    reasons: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "satisfied": bool(self.satisfied),
            "expected_kind": self.expected_kind,
            "expected_k": self.expected_k,
            "reasons": list(self.reasons),
        }


def _block_signature_differs(lam, x0, a, b):
    if len(a) != len(b):
        return True
    return bool(
        np.any(np.abs(lam[a] - lam[b]) > PARAM_DIFF_TOL)
        or np.any(np.abs(x0[a] - x0[b]) > PARAM_DIFF_TOL)
    )


def verify_theorem_conditions(params, schedule, lg, x0, individual_lambda=INDIVIDUAL_LAMBDA):
    """
    Report, for each consensus guarantee, whether the hypotheses hold and
    which configuration they predict. Unmet hypotheses are listed in
    ``reasons``; nothing is raised.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim == 1:
        x0 = x0.reshape(-1, 1)
    n = x0.shape[0]
    lam = params.eff_lam
    w_star = sp.csr_matrix(schedule.stabilized())
    m_star = combined_matrix(w_star, lg, params)
    checks = []

    # Convergence to a unique fixed point.
    bounds = [op_norm_bound(combined_matrix(schedule.weights_at(t), lg, params)) for t in range(len(schedule.per_step) + 1)]
    contraction = ConditionCheck("contraction", max(bounds) < 1.0)
    if not contraction.satisfied:
        contraction.reasons.append("norm bound {:.6g} >= 1".format(max(bounds)))
    checks.append(contraction)

    # Single consensus: plain averaging on a connected, aperiodic W*.
    single = ConditionCheck("single-consensus", True, SINGLE, 1)
    if params.eff_alpha != 0.0:
        single.reasons.append("alpha != 0")
    if np.any(lam != 0.0):
        single.reasons.append("lambda != 0")
    if params.eff_mu != 0.0:
        single.reasons.append("mu != 0")
    if not params.uses_neighbors:
        single.reasons.append("neighborhood term disabled")
    sums = np.asarray(w_star.sum(axis=1)).ravel()
    if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(w_star.data < 0):
        single.reasons.append("W* is not row-stochastic")
    support = w_star.copy()
    support.eliminate_zeros()
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    if n_comp != 1:
        single.reasons.append("W* support is not connected")
    if np.any(w_star.diagonal() <= 0.0):
        single.reasons.append("W* is not lazy (zero self-weight)")
    single.satisfied = not single.reasons
    checks.append(single)

    # Multi consensus: block-diagonal M* with blocks that differ.
    blocks = detect_blocks(m_star)
    multi = ConditionCheck("multi-consensus", False, MULTI)
    if len(blocks) < 2:
        multi.reasons.append("M* has a single block")
    else:
        distinct = []
        for b in blocks:
            if all(_block_signature_differs(lam, x0, b, other) for other in distinct):
                distinct.append(b)
        if len(distinct) < 2:
            multi.reasons.append("all blocks share the same parameters and initial state")
        multi.expected_k = len(distinct)
    multi.satisfied = not multi.reasons
    checks.append(multi)

    # Individualized consensus: strong stubbornness and distinct starts.
    indiv = ConditionCheck("individualized-consensus", False, INDIVIDUALIZED, n)
    if n > 1:
        dists = cKDTree(x0).query_pairs(r=PARAM_DIFF_TOL)
        if dists:
            indiv.reasons.append("initial states are not pairwise distinct")
    if lam.min() < individual_lambda:
        indiv.reasons.append("min lambda {:.6g} < {:.6g}".format(lam.min(), individual_lambda))
    indiv.satisfied = not indiv.reasons
    checks.append(indiv)

    return checks
