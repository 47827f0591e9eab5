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
Stubborn neural diffusion on a graph.

Each step mixes four terms:

    X(t+1) = a X(t) + (1-a) [ L X(0) + (I-L) (W(t) - mu Lg) X(t) ]

where ``a`` is the retention coefficient, ``L`` the diagonal of per-node
stubbornness values, ``W(t)`` a row-stochastic influence matrix and ``Lg``
the normalized Laplacian. ``M(t) = (I-L)(W(t) - mu Lg)`` is the combined
influence matrix whose operator norm decides whether the iteration contracts.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .common import (
    CertificationError,
    ConfigError,
    DivergenceError,
    ShapeError,
    StochasticityError,
    csv_text,
    issue,
)
from .graph import (
    check_features,
    check_row_stochastic,
    norm_1_inf,
    normalized_laplacian,
    on_pattern,
    row_ids,
    spmm,
)

logger = logging.getLogger(__name__)

# The four terms of the update. Any of them can be switched off for ablations.
COMPONENTS = ("retention", "attachment", "neighborhood", "regularization")

CONVERGENCE_TOL = 1e-6
DIVERGENCE_LIMIT = 1e12
DENSE_SOLVE_CUTOFF = 5000
NEUMANN_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class DiffusionParams:
    alpha: float
    lam: np.ndarray
    mu: float
    steps: int
    components: tuple = COMPONENTS

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64).ravel()
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "components", tuple(self.components))
        if not 0.0 <= self.alpha < 1.0:
            issue("alpha must lie in [0, 1) (got {}).".format(self.alpha), "error", ConfigError, field="alpha")
        if lam.size == 0 or np.any(~np.isfinite(lam)) or np.any(lam < 0.0) or np.any(lam > 1.0):
            issue("Every stubbornness value must lie in [0, 1].", "error", ConfigError, field="lambda")
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            issue("mu must be >= 0 (got {}).".format(self.mu), "error", ConfigError, field="mu")
        if int(self.steps) != self.steps or self.steps < 1:
            issue("steps must be a positive count (got {}).".format(self.steps), "error", ConfigError, field="steps")
        unknown = set(self.components) - set(COMPONENTS)
        if unknown:
            issue(
                "Unknown diffusion components {}.".format(sorted(unknown)),
                "error",
                ConfigError,
                field="components",
            )

    @classmethod
    def uniform(cls, n, alpha, lam, mu, steps, components=COMPONENTS):
        """Parameters with the same stubbornness on all ``n`` nodes."""
        return cls(alpha=alpha, lam=np.full(n, float(lam)), mu=mu, steps=steps, components=components)

    # Effective values after switching off ablated terms.
    @property
    def eff_alpha(self):
        return self.alpha if "retention" in self.components else 0.0

    @property
    def eff_lam(self):
        return self.lam if "attachment" in self.components else np.zeros_like(self.lam)

    @property
    def eff_mu(self):
        return self.mu if "regularization" in self.components else 0.0

    @property
    def uses_neighbors(self):
        return "neighborhood" in self.components


def learning_rate(t):
    """Decaying step size 1/(1+t) for the influence-weight evolution."""
    return 1.0 / (1.0 + t)


@dataclass
class WeightSchedule:
    """
    The influence matrices W(0), W(1), ... used by a diffusion run.

    ``static`` mode reuses ``base`` at every step. ``dynamic`` mode keeps the
    already materialized W(1..T) in ``per_step``.
    """

    mode: str
    base: sp.csr_matrix
    per_step: list = field(default_factory=list)
    max_delta_norm: float = 1.0

    def __post_init__(self):
        if self.mode not in ("static", "dynamic"):
            issue("Weight mode must be 'static' or 'dynamic' (got {!r}).".format(self.mode), "error", ConfigError, field="mode")
        if not self.max_delta_norm > 0:
            issue("max_delta_norm must be > 0.", "error", ConfigError, field="max_delta_norm")
        self.base = sp.csr_matrix(self.base)
        self.base.sort_indices()
        if np.any(self.base.data < 0):
            issue("Influence weights must be nonnegative.", "error", StochasticityError)
        check_row_stochastic(self.base, tol=1e-12)
        if self.mode == "static" and self.per_step:
            issue("A static schedule cannot carry per-step weights.", "error", ConfigError, field="per_step")

    @classmethod
    def static(cls, base):
        return cls(mode="static", base=base)

    @classmethod
    def dynamic(cls, base, deltas=None, steps=1, max_delta_norm=1.0):
        """
        Materialize W(1..steps) from ``base``. ``deltas`` is a list of sparse
        adjustments (one per step) or None for zero adjustments.
        """
        schedule = cls(mode="dynamic", base=base, max_delta_norm=max_delta_norm)
        for t in range(steps):
            if deltas is None:
                delta = sp.csr_matrix(schedule.base.shape)
            else:
                delta = deltas[t]
            schedule.per_step.append(evolve_weights(schedule, delta, t))
        return schedule

    def weights_at(self, t):
        if self.mode == "static" or t == 0:
            return self.base
        if t - 1 >= len(self.per_step):
            issue(
                "Weight schedule holds {} evolved steps, step {} was requested.".format(len(self.per_step), t),
                "error",
                ConfigError,
                field="per_step",
            )
        return self.per_step[t - 1]

    def stabilized(self):
        """The last materialized influence matrix (W* for a settled schedule)."""
        return self.per_step[-1] if self.per_step else self.base


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    step_deltas: list = field(default_factory=list)

    @property
    def final(self):
        return self.snapshots[-1]


@dataclass
class ConvergenceReport:
    bound_per_step: list = field(default_factory=list)
    contraction_beta: float = float("nan")
    converged: bool = False
    final_delta: float = float("nan")
    fixed_point_residual: float = None
    tolerance: float = CONVERGENCE_TOL

    def to_dict(self):
        return {
            "bound_per_step": [float(b) for b in self.bound_per_step],
            "contraction_beta": float(self.contraction_beta),
            "converged": bool(self.converged),
            "final_delta": float(self.final_delta),
            "fixed_point_residual": None if self.fixed_point_residual is None else float(self.fixed_point_residual),
            "tolerance": float(self.tolerance),
        }


def _check_square(mat, n, what):
    if mat.shape != (n, n):
        issue("{} is {}x{}, expected {}x{}.".format(what, mat.shape[0], mat.shape[1], n, n), "error", ShapeError)


def combined_matrix(w, lg, params):
    """M = diag(1 - lam) (W - mu Lg) on the union of the two supports."""
    n = params.lam.shape[0]
    _check_square(w, n, "W")
    _check_square(lg, n, "Lg")
    inner = sp.csr_matrix(w) if params.uses_neighbors else sp.csr_matrix((n, n))
    if params.eff_mu != 0.0:
        inner = inner - params.eff_mu * sp.csr_matrix(lg)
    m = sp.csr_matrix(sp.diags(1.0 - params.eff_lam) @ inner)
    m.sum_duplicates()
    m.sort_indices()
    return m


def op_norm_bound(m):
    """sqrt(|M|_1 |M|_inf), an upper bound on the spectral norm computable in O(nnz)."""
    norm1, norm_inf = norm_1_inf(m)
    return math.sqrt(norm1 * norm_inf)


def reg_loss(m_sequence, margin=1.0):
    """Hinge penalty sum_t max(0, bound(M(t)) - margin)."""
    return float(sum(max(0.0, op_norm_bound(m) - margin) for m in m_sequence))


def diffusion_step(x, x0, w, lg, params):
    """Apply one diffusion step and return the new feature matrix."""
    x = check_features(x, "state")
    x0 = check_features(x0, "initial state")
    n = params.lam.shape[0]
    if x.shape != x0.shape or x.shape[0] != n:
        issue(
            "State {} and initial state {} do not fit {} nodes.".format(x.shape, x0.shape, n),
            "error",
            ShapeError,
        )
    _check_square(w, n, "W")
    _check_square(lg, n, "Lg")

    alpha = params.eff_alpha
    lam = params.eff_lam[:, None]
    mu = params.eff_mu

    if params.uses_neighbors:
        inner = spmm(w, x)
    else:
        inner = np.zeros_like(x)
    if mu != 0.0:
        inner = inner - mu * spmm(lg, x)
    out = lam * x0 + (1.0 - lam) * inner
    if alpha != 0.0:
        out = alpha * x + (1.0 - alpha) * out
    return out


def project_rows(raw, rows, n):
    """
    Clamp negative entries to 0 then rescale each row to sum 1.
    Returns (projected, clamped, row_sums).
    """
    clamped = np.maximum(raw, 0.0)
    sums = np.bincount(rows, weights=clamped, minlength=n)
    present = np.bincount(rows, minlength=n) > 0
    dead = np.flatnonzero(present & (sums <= 0.0))
    if len(dead):
        issue(
            "Row {} of the influence matrix collapsed to zero; the weight delta is degenerate.".format(int(dead[0])),
            "error",
            StochasticityError,
        )
    return clamped / sums[rows], clamped, sums


def evolve_data(w_data, d_data, rows, n, t, k):
    """
    Core of the weight evolution on the stored entries of one CSR pattern.
    Returns the new entries and the intermediates needed to differentiate it.
    """
    d_norm = float(np.linalg.norm(d_data))
    clipped = d_data * (k / d_norm) if d_norm > k else d_data
    eta = learning_rate(t)
    raw = w_data + eta * clipped
    projected, clamped, sums = project_rows(raw, rows, n)

    # Cap the move at eta*k; a convex mix of two row-stochastic matrices stays row-stochastic.
    move = projected - w_data
    move_norm = float(np.linalg.norm(move))
    cap = eta * k
    capped = move_norm > cap
    out = w_data + move * (cap / move_norm) if capped else projected

    trace = {
        "d": d_data,
        "d_norm": d_norm,
        "k": k,
        "eta": eta,
        "raw": raw,
        "projected": projected,
        "clamped": clamped,
        "sums": sums,
        "move": move,
        "move_norm": move_norm,
        "cap": cap,
        "capped": capped,
        "rows": rows,
        "n": n,
    }
    return out, trace


def evolve_weights(schedule, delta, t):
    """
    W(t+1) = P[W(t) + eta(t) delta] with eta(t) = 1/(1+t).

    ``delta`` is clipped to Frobenius norm ``schedule.max_delta_norm`` and P
    clamps to nonnegative and renormalizes rows, so every W(t+1) is
    row-stochastic and |W(t+1) - W(t)|_F <= eta(t) k.
    """
    w = schedule.weights_at(t)
    n = w.shape[0]
    _check_square(delta, n, "delta")

    delta = sp.csr_matrix(delta)
    support = sp.csr_matrix((np.ones(w.nnz), w.indices, w.indptr), shape=w.shape)
    outside = delta - delta.multiply(support)
    if np.any(outside.data != 0.0):
        issue("The weight delta has entries outside the influence support.", "error", StochasticityError)

    new_data, _ = evolve_data(w.data, on_pattern(delta, w), row_ids(w), n, t, schedule.max_delta_norm)
    return sp.csr_matrix((new_data, w.indices.copy(), w.indptr.copy()), shape=w.shape)


def disagreement_delta(w, x):
    """
    Negative gradient of 1/2 |X - W X|^2 with respect to the stored entries
    of ``w``: entry (i, j) is <x_i - (W X)_i, x_j>.
    """
    x = check_features(x, "state")
    w = sp.csr_matrix(w)
    u = x - spmm(w, x)
    rows = row_ids(w)
    data = np.einsum("ij,ij->i", u[rows], x[w.indices])
    return sp.csr_matrix((data, w.indices.copy(), w.indptr.copy()), shape=w.shape)


def energy_schedule(x0, params, base, lg, max_delta_norm=1.0):
    """
    Dynamic schedule for ``params.steps`` steps whose W(t+1) follows the
    disagreement delta of the state reached at step t.
    """
    schedule = WeightSchedule(mode="dynamic", base=base, max_delta_norm=max_delta_norm)
    x0 = check_features(x0, "initial state")
    x = x0
    for t in range(params.steps):
        w = schedule.weights_at(t)
        delta = disagreement_delta(w, x)
        x = diffusion_step(x, x0, w, lg, params)
        schedule.per_step.append(evolve_weights(schedule, delta, t))
    return schedule


def _relative_change(new, old):
    diff = np.linalg.norm(new - old)
    base = np.linalg.norm(old)
    if base == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return float(diff / base)


def run_diffusion(x0, g, params, schedule, tol=CONVERGENCE_TOL, lg=None, solve_fixed_point=False):
    """
    Run ``params.steps`` diffusion steps from ``x0``.

    Returns a (Trajectory, ConvergenceReport) pair. Raises DivergenceError
    naming the first step whose state is non-finite or exceeds 1e12.
    """
    x0 = check_features(x0, "initial state")
    if x0.shape[0] != g.n:
        issue("Initial state has {} rows for {} nodes.".format(x0.shape[0], g.n), "error", ShapeError)
    if lg is None:
        lg = normalized_laplacian(g)

    traj = Trajectory(snapshots=[x0])
    report = ConvergenceReport(tolerance=tol)
    x = x0
    for t in range(params.steps):
        w = schedule.weights_at(t)
        report.bound_per_step.append(op_norm_bound(combined_matrix(w, lg, params)))
        x_next = diffusion_step(x, x0, w, lg, params)
        if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next), initial=0.0) > DIVERGENCE_LIMIT:
            issue("Diffusion diverged at step {}.".format(t + 1), "error", DivergenceError, step=t + 1)
        traj.step_deltas.append(_relative_change(x_next, x))
        traj.snapshots.append(x_next)
        logger.debug("step %d: delta %.3e bound %.4f", t + 1, traj.step_deltas[-1], report.bound_per_step[-1])
        x = x_next

    alpha = params.eff_alpha
    report.contraction_beta = alpha + (1.0 - alpha) * max(report.bound_per_step)
    report.final_delta = traj.step_deltas[-1]
    report.converged = bool(report.final_delta < tol)

    if solve_fixed_point:
        m_star = combined_matrix(schedule.stabilized(), lg, params)
        x_star = fixed_point_solve(x0, m_star, params.eff_lam)
        report.fixed_point_residual = fixed_point_residual(x_star, x0, m_star, params.eff_lam)

    return traj, report


def fixed_point_residual(x_star, x0, m_star, lam):
    """|(I - M*) X* - L X(0)|_F / |L X(0)|_F (absolute when the right side is 0)."""
    rhs = np.asarray(lam)[:, None] * x0
    resid = np.linalg.norm(x_star - spmm(m_star, x_star) - rhs)
    scale = np.linalg.norm(rhs)
    return float(resid / scale) if scale > 0 else float(resid)


def fixed_point_solve(x0, m_star, lam, dense_cutoff=DENSE_SOLVE_CUTOFF):
    """
    Solve (I - M*) X* = L X(0).

    Refuses unless the norm bound of M* is below 1, which certifies that
    I - M* is invertible. Small systems use a dense LU factorization, larger
    ones a truncated Neumann series.
    """
    x0 = check_features(x0, "initial state")
    lam = np.asarray(lam, dtype=np.float64)
    bound = op_norm_bound(m_star)
    if not bound < 1.0:
        issue(
            "Norm bound of M* is {:.6g} >= 1, invertibility of I - M* is not certified.".format(bound),
            "error",
            CertificationError,
        )
    n = x0.shape[0]
    _check_square(m_star, n, "M*")
    rhs = lam[:, None] * x0

    if n <= dense_cutoff:
        system = np.eye(n) - sp.csr_matrix(m_star).toarray()
        x_star = scipy.linalg.lu_solve(scipy.linalg.lu_factor(system), rhs)
    else:
        x_star = rhs.copy()
        term = rhs
        while np.linalg.norm(term) >= NEUMANN_TOL:
            term = spmm(m_star, term)
            x_star = x_star + term

    resid = fixed_point_residual(x_star, x0, m_star, lam)
    if resid >= RESIDUAL_TOL:
        issue("Fixed-point residual {:.3e} exceeds {:.0e}.".format(resid, RESIDUAL_TOL))
    return x_star


def trajectory_csv(traj, report):
    """CSV text with one (step, relative_delta, op_norm_bound) row per step."""
    rows = [
        (t + 1, float(delta), float(bound))
        for t, (delta, bound) in enumerate(zip(traj.step_deltas, report.bound_per_step))
    ]
    return csv_text(["step", "relative_delta", "op_norm_bound"], rows)


def snapshot_csv(x):
    return csv_text(None, [[float(v) for v in row] for row in np.asarray(x)])
