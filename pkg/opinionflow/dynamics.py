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
Classical opinion-dynamics steppers: French-DeGroot averaging,
Friedkin-Johnsen stubborn averaging and Hegselmann-Krause bounded confidence.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .common import ConfigError, ShapeError, issue
from .graph import check_row_stochastic, row_ids, spmm


@dataclass(frozen=True)
class HKConfig:
    epsilon: float
    include_self: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            issue(
                "HK confidence bound must be > 0 (got {}).".format(self.epsilon),
                "error",
                ConfigError,
                field="epsilon",
            )


@dataclass(frozen=True)
class FJConfig:
    lam: np.ndarray
    weights: sp.csr_matrix

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64)
        if np.any(lam < 0.0) or np.any(lam > 1.0):
            issue("Every attachment value must lie in [0, 1].", "error", ConfigError, field="lambda")
        if lam.shape[0] != self.weights.shape[0]:
            issue("lambda and weights disagree on node count.", "error", ShapeError)
        check_row_stochastic(self.weights, tol=1e-12)
        object.__setattr__(self, "lam", lam)


def fd_step(x, w):
    """One DeGroot averaging step x' = W x."""
    check_row_stochastic(w)
    return spmm(w, x)


def fj_step(x, x0, cfg):
    """One Friedkin-Johnsen step x'_i = lam_i x0_i + (1 - lam_i) (W x)_i."""
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x.shape != x0.shape or x.shape[0] != cfg.lam.shape[0]:
        issue(
            "FJ shapes disagree: x {}, x0 {}, {} nodes.".format(x.shape, x0.shape, cfg.lam.shape[0]),
            "error",
            ShapeError,
        )
    lam = cfg.lam[:, None]
    return lam * x0 + (1.0 - lam) * spmm(cfg.weights, x)


def hk_step(x, g, cfg):
    """
    One Hegselmann-Krause step: each node moves to the mean of itself and the
    neighbors whose opinion vectors lie within ``epsilon`` (Euclidean).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] != g.n:
        issue("HK state has {} rows for {} nodes.".format(x.shape[0], g.n), "error", ShapeError)

    rows = row_ids(g.csr)
    cols = g.csr.indices
    dist = np.linalg.norm(x[rows] - x[cols], axis=1)
    close = (dist <= cfg.epsilon).astype(np.float64)
    confidant = sp.csr_matrix((close, cols, g.csr.indptr), shape=(g.n, g.n))

    total = spmm(confidant, x)
    count = np.asarray(confidant.sum(axis=1)).ravel()
    if cfg.include_self:
        total = total + x
        count = count + 1.0
    else:
        # A node with nobody in range keeps its opinion.
        lonely = count == 0
        total[lonely] = x[lonely]
        count[lonely] = 1.0
    return total / count[:, None]
