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
Monte Carlo cascade oracles (independent cascade, linear threshold and SIS)
producing per-node activation probabilities.

Runs are simulated RUN_BLOCK at a time as (runs x nodes) boolean arrays.
Block b draws from ``numpy.random.default_rng([rng_seed, b])`` so the
result depends only on the seed and the run count.
"""

import itertools
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .common import ConfigError, config_items, csv_text, issue, typed_fields
from .graph import row_ids

logger = logging.getLogger(__name__)

IC = "ic"
LT = "lt"
SIS = "sis"
MODELS = (IC, LT, SIS)

RUN_BLOCK = 1000
SEED_FRACTION = 0.1
EXACT_IC_MAX_NODES = 12


@dataclass
class CascadeConfig:
    """
    Cascade model settings. ``p`` of None selects the weighted cascade rule
    p(u, v) = 1/deg(v) for IC. ``sis_final_state`` switches SIS output from
    "ever infected" to "infected after the last step".
    """

    model: str = IC
    runs: int = 10000
    seed_set: tuple = ()
    rng_seed: int = 0
    p: float = None
    beta: float = 0.1
    gamma: float = 0.05
    horizon: int = 30
    sis_final_state: bool = False

    def __post_init__(self):
        self.model = str(self.model).lower()
        self.seed_set = tuple(sorted(set(config_items(self.seed_set, int, "seed_set"))))

        def bad(field_name, msg):
            issue("{}: {}".format(field_name, msg), "error", ConfigError, field=field_name)

        if self.model not in MODELS:
            bad("model", "must be one of {}".format(", ".join(MODELS)))
        if int(self.runs) != self.runs or self.runs < 1:
            bad("runs", "must be a positive count")
        if not self.seed_set:
            bad("seed_set", "must name at least one node")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            bad("p", "must lie in [0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            bad("beta", "must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            bad("gamma", "must lie in [0, 1]")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            bad("horizon", "must be a positive count")

    @classmethod
    def from_dict(cls, d):
        return cls(**typed_fields(cls, d, "cascade"))

    def to_dict(self):
        d = asdict(self)
        d["seed_set"] = list(self.seed_set)
        return d


def _seed_mask(g, cfg):
    seeds = np.asarray(cfg.seed_set, dtype=np.int64)
    if seeds.min() < 0 or seeds.max() >= g.n:
        issue("Seed node outside [0, {}).".format(g.n), "error", ConfigError, field="seed_set")
    mask = np.zeros(g.n, dtype=bool)
    mask[seeds] = True
    return mask


def _arcs(g):
    """Both directions of every edge as (src, dst) arrays, in CSR order."""
    return row_ids(g.csr), g.csr.indices.copy()


def _arc_probabilities(g, dst, p):
    if p is None:
        return 1.0 / g.degrees[dst].astype(np.float64)
    return np.full(len(dst), float(p))


def _blocks(runs):
    start, block = 0, 0
    while start < runs:
        size = min(RUN_BLOCK, runs - start)
        yield block, size
        start += size
        block += 1


def _spread(active, frontier, src, into_dst, live):
    """Activate everything reachable from ``frontier`` along ``live`` arcs, in place."""
    while frontier.any():
        fired = frontier[:, src] & live
        hit = np.asarray(into_dst.T @ fired.T.astype(np.float64)).T > 0.0
        frontier = hit & ~active
        active |= frontier
    return active


def simulate_ic(g, cfg):
    """
    Independent cascade. Each arc (u, v) is live with probability p(u, v),
    drawn once per run; a node is activated iff a live path reaches it from
    the seeds. Arc draws don't depend on the seed set, so at a fixed
    ``rng_seed`` adding seeds never lowers any probability.
    """
    seeds = _seed_mask(g, cfg)
    src, dst = _arcs(g)
    probs = _arc_probabilities(g, dst, cfg.p)
    into_dst = sp.csr_matrix((np.ones(len(dst)), (np.arange(len(dst)), dst)), shape=(len(dst), g.n))

    counts = np.zeros(g.n)
    for block, size in _blocks(cfg.runs):
        rng = np.random.default_rng([cfg.rng_seed, block])
        live = rng.random((size, len(dst))) < probs
        active = np.tile(seeds, (size, 1))
        _spread(active, active.copy(), src, into_dst, live)
        counts += active.sum(axis=0)
        logger.debug("IC block %d: %d runs", block, size)
    return counts / cfg.runs


def simulate_lt(g, cfg):
    """
    Linear threshold with weight 1/deg(v) on every edge into v and
    thresholds uniform on (0, 1]. Progressive until nothing changes.
    """
    seeds = _seed_mask(g, cfg)
    cols = g.csr.indices
    # Entry (u, v) is the weight node u exerts on node v.
    weight = sp.csr_matrix(
        (1.0 / g.degrees[cols].astype(np.float64), cols, g.csr.indptr), shape=(g.n, g.n)
    ) if g.m else sp.csr_matrix((g.n, g.n))
    weight_t = weight.T.tocsr()

    counts = np.zeros(g.n)
    for block, size in _blocks(cfg.runs):
        rng = np.random.default_rng([cfg.rng_seed, block])
        thresholds = 1.0 - rng.random((size, g.n))
        active = np.tile(seeds, (size, 1))
        while True:
            pressure = np.asarray(weight_t @ active.T.astype(np.float64)).T
            newly = (pressure >= thresholds) & ~active
            if not newly.any():
                break
            active |= newly
        counts += active.sum(axis=0)
        logger.debug("LT block %d: %d runs", block, size)
    return counts / cfg.runs


def simulate_sis(g, cfg):
    """
    SIS over ``horizon`` steps. Each step every infected node infects each
    susceptible neighbor with probability beta, then every infected node
    (the newly infected included) recovers with probability gamma.
    """
    seeds = _seed_mask(g, cfg)
    adj = g.csr

    counts = np.zeros(g.n)
    for block, size in _blocks(cfg.runs):
        rng = np.random.default_rng([cfg.rng_seed, block])
        infected = np.tile(seeds, (size, 1))
        ever = infected.copy()
        for _ in range(cfg.horizon):
            k = np.asarray(adj @ infected.T.astype(np.float64)).T
            catch = 1.0 - (1.0 - cfg.beta) ** k
            newly = ~infected & (rng.random((size, g.n)) < catch)
            infected |= newly
            infected &= rng.random((size, g.n)) >= cfg.gamma
            ever |= newly
        counts += (infected if cfg.sis_final_state else ever).sum(axis=0)
        logger.debug("SIS block %d: %d runs", block, size)
    return counts / cfg.runs


def simulate(g, cfg):
    """Dispatch on ``cfg.model``."""
    return {IC: simulate_ic, LT: simulate_lt, SIS: simulate_sis}[cfg.model](g, cfg)


def exact_ic_probabilities(g, seeds, p=None):
    """
    Exact IC activation probabilities by enumerating every way each round
    of newly activated nodes can spread. Limited to small graphs.
    """
    if g.n > EXACT_IC_MAX_NODES:
        issue(
            "Exact IC enumeration handles at most {} nodes (got {}).".format(EXACT_IC_MAX_NODES, g.n),
            "error",
            ConfigError,
            field="n",
        )
    n = g.n
    nbrs = [g.neighbors(v).tolist() for v in range(n)]

    def arc_p(u, v):
        return 1.0 / g.degrees[v] if p is None else float(p)

    @lru_cache(maxsize=None)
    def final(active, frontier):
        if not frontier:
            return tuple(float((active >> v) & 1) for v in range(n))
        cand = [v for v in range(n) if not (active >> v) & 1 and any((frontier >> u) & 1 for u in nbrs[v])]
        q = []
        for v in cand:
            miss = 1.0
            for u in nbrs[v]:
                if (frontier >> u) & 1:
                    miss *= 1.0 - arc_p(u, v)
            q.append(1.0 - miss)
        out = np.zeros(n)
        for hits in itertools.product((False, True), repeat=len(cand)):
            weight = 1.0
            new = 0
            for v, qv, h in zip(cand, q, hits):
                weight *= qv if h else 1.0 - qv
                if h:
                    new |= 1 << v
            if weight:
                out += weight * np.asarray(final(active | new, new))
        return tuple(out)

    start = 0
    for s in set(int(s) for s in seeds):
        start |= 1 << s
    return np.asarray(final(start, start))


def random_seed_set(n, fraction=SEED_FRACTION, rng=None):
    """A sorted uniform random subset holding ``fraction`` of the n nodes (at least one)."""
    if not 0.0 < fraction <= 1.0:
        issue("Seed fraction must lie in (0, 1].", "error", ConfigError, field="fraction")
    rng = np.random.default_rng(rng)
    size = max(1, int(round(fraction * n)))
    return np.sort(rng.choice(n, size=size, replace=False))


def probabilities_csv(probs):
    return csv_text(["node", "probability"], [(i, float(v)) for i, v in enumerate(probs)])
