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
Trainable diffusion model with exact reverse-mode gradients.

The model is

    X(0) = tanh(H A + b)
    X(t+1) = a X(t) + (1-a) [ L X(0) + (I-L) (W(t) X(t) - mu Lg X(t)) ]
    Y = X(T) R + c

with stubbornness L = sigmoid(lambda_logits), mu = softplus(mu_logit) and
W(0) the row-softmax of one logit per influence slot (edges plus diagonal).
In dynamic mode W(t+1) is evolved from W(t) inside the unroll, by default
along the negative gradient of the total loss w.r.t. W(t) from the previous
epoch (held constant within an epoch), or optionally along the local
disagreement energy. Gradients are propagated by hand through every step,
the reparameterizations and the norm-bound hinge penalty.
"""

import json
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, log_softmax, logit, softmax

from .common import (
    ConfigError,
    DivergenceError,
    OpinionFlowError,
    ParseError,
    ShapeError,
    config_items,
    csv_text,
    issue,
    typed_fields,
    write_atomic_bytes,
)
from .diffusion import (
    COMPONENTS,
    DIVERGENCE_LIMIT,
    _relative_change,
    Trajectory,
    evolve_data,
    op_norm_bound,
    reg_loss,
)
from .graph import (
    Graph,
    check_features,
    influence_pattern,
    normalized_laplacian,
    on_pattern,
    row_ids,
    spmm,
)

logger = logging.getLogger(__name__)

CLASSIFICATION = "classification"
REGRESSION = "regression"

# Where the dynamic-mode weight delta comes from.
LOSS_DELTA = "loss"
ENERGY_DELTA = "energy"

OPTIMIZERS = ("gd", "adam")
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Initial regression outputs behind a sigmoid are kept off 0 and 1.
LEVEL_CLIP = 0.02

# Order of the parameter arrays in checkpoints and gradient listings.
FIELD_ORDER = (
    "theta_w",
    "theta_b",
    "readout_w",
    "readout_b",
    "lambda_logits",
    "mu_logit",
    "edge_logits",
)

CHECKPOINT_MAGIC = b"OFCKPT01"


@dataclass
class TrainConfig:
    task: str = CLASSIFICATION
    n_classes: int = None
    epochs: int = 300
    lr: float = 1e-2
    steps: int = 4
    alpha: float = 0.3
    mode: str = "static"
    seed: int = 0
    split: tuple = (0.6, 0.2, 0.2)
    margin: float = 0.99
    hidden: int = 16
    weight_decay: float = 0.0
    readout: str = "identity"
    max_delta_norm: float = 1.0
    freeze_schedule: bool = False
    components: tuple = COMPONENTS
    init_lambda: float = 0.5
    init_mu: float = 0.1
    delta_source: str = LOSS_DELTA
    optimizer: str = "gd"

    def __post_init__(self):
        self.split = tuple(config_items(self.split, float, "split"))
        self.components = tuple(config_items(self.components, str, "components"))

        def bad(field_name, msg):
            issue("{}: {}".format(field_name, msg), "error", ConfigError, field=field_name)

        if self.task not in (CLASSIFICATION, REGRESSION):
            bad("task", "must be 'classification' or 'regression'")
        if self.n_classes is not None and int(self.n_classes) < 2:
            bad("n_classes", "needs at least 2 classes")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            bad("epochs", "must be a positive count")
        if not self.lr > 0:
            bad("lr", "must be > 0")
        if int(self.steps) != self.steps or self.steps < 1:
            bad("steps", "must be a positive count")
        if not 0.0 <= self.alpha < 1.0:
            bad("alpha", "must lie in [0, 1)")
        if self.mode not in ("static", "dynamic"):
            bad("mode", "must be 'static' or 'dynamic'")
        if len(self.split) != 3 or min(self.split) < 0 or abs(sum(self.split) - 1.0) > 1e-9:
            bad("split", "needs three nonnegative fractions summing to 1")
        if not self.margin > 0:
            bad("margin", "must be > 0")
        if int(self.hidden) != self.hidden or self.hidden < 1:
            bad("hidden", "must be a positive count")
        if not self.weight_decay >= 0:
            bad("weight_decay", "must be >= 0")
        if self.readout not in ("identity", "sigmoid"):
            bad("readout", "must be 'identity' or 'sigmoid'")
        if not self.max_delta_norm > 0:
            bad("max_delta_norm", "must be > 0")
        if set(self.components) - set(COMPONENTS):
            bad("components", "unknown names {}".format(sorted(set(self.components) - set(COMPONENTS))))
        if not 0.0 < self.init_lambda < 1.0:
            bad("init_lambda", "must lie in (0, 1)")
        if not self.init_mu > 0:
            bad("init_mu", "must be > 0")
        if self.delta_source not in (LOSS_DELTA, ENERGY_DELTA):
            bad("delta_source", "must be '{}' or '{}'".format(LOSS_DELTA, ENERGY_DELTA))
        if self.optimizer not in OPTIMIZERS:
            bad("optimizer", "must be one of {}".format(", ".join(OPTIMIZERS)))

    @classmethod
    def from_dict(cls, d):
        return cls(**typed_fields(cls, d, "training"))

    def to_dict(self):
        d = asdict(self)
        d["split"] = list(self.split)
        d["components"] = list(self.components)
        return d


@dataclass
class ModelParams:
    theta_w: np.ndarray
    theta_b: np.ndarray
    readout_w: np.ndarray
    readout_b: np.ndarray
    lambda_logits: np.ndarray
    mu_logit: np.ndarray
    edge_logits: np.ndarray
    alpha: float
    # Dynamic-mode weight deltas on the influence pattern, one per step but the last.
    deltas: list = None

    def arrays(self):
        return OrderedDict((name, getattr(self, name)) for name in FIELD_ORDER)

    def copy(self):
        deltas = None if self.deltas is None else [d.copy() for d in self.deltas]
        return ModelParams(alpha=self.alpha, deltas=deltas, **{k: v.copy() for k, v in self.arrays().items()})

    def count(self):
        return int(sum(v.size for v in self.arrays().values()))

    @property
    def lam(self):
        return expit(self.lambda_logits)

    @property
    def mu(self):
        return float(np.logaddexp(0.0, self.mu_logit[0]))


@dataclass
class TrainLoss:
    task_loss: float
    reg_loss: float
    total: float


@dataclass
class GraphContext:
    """Per-graph constants shared by every forward pass."""

    graph: Graph
    pattern: sp.csr_matrix
    rows: np.ndarray
    cols: np.ndarray
    lg: sp.csr_matrix
    l_data: np.ndarray

    @property
    def n(self):
        return self.graph.n

    def matrix(self, data):
        """A CSR matrix on the influence pattern holding ``data``."""
        return sp.csr_matrix((data, self.pattern.indices, self.pattern.indptr), shape=self.pattern.shape)


def graph_context(g):
    if isinstance(g, GraphContext):
        return g
    pattern = influence_pattern(g)
    lg = normalized_laplacian(g)
    return GraphContext(
        graph=g,
        pattern=pattern,
        rows=row_ids(pattern),
        cols=pattern.indices.copy(),
        lg=lg,
        l_data=on_pattern(lg, pattern),
    )


def _row_softmax(logits, ctx):
    row_max = np.maximum.reduceat(logits, ctx.pattern.indptr[:-1])
    e = np.exp(logits - row_max[ctx.rows])
    sums = np.bincount(ctx.rows, weights=e, minlength=ctx.n)
    return e / sums[ctx.rows]


def init_params(g, n_features, n_outputs, cfg, rng, level=None):
    """
    Random f_theta and readout, uniform W, and the configured initial
    stubbornness and mu. With ``level`` (one value per output) the readout
    starts at zero weight with that bias, so every node predicts ``level``.
    """
    ctx = graph_context(g)
    d = int(cfg.hidden)
    theta_w = rng.normal(0.0, 1.0 / np.sqrt(n_features), size=(n_features, d))
    readout_w = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, n_outputs))
    readout_b = np.zeros(n_outputs)
    if level is not None:
        readout_w[:] = 0.0
        readout_b = np.broadcast_to(np.asarray(level, dtype=np.float64), (n_outputs,)).copy()
    return ModelParams(
        theta_w=theta_w,
        theta_b=np.zeros(d),
        readout_w=readout_w,
        readout_b=readout_b,
        lambda_logits=np.full(ctx.n, np.log(cfg.init_lambda / (1.0 - cfg.init_lambda))),
        mu_logit=np.array([np.log(np.expm1(cfg.init_mu))]),
        edge_logits=np.zeros(ctx.pattern.nnz),
        alpha=float(cfg.alpha),
    )


def _effective(params, cfg, n):
    comps = cfg.components
    alpha = params.alpha if "retention" in comps else 0.0
    lam = params.lam if "attachment" in comps else np.zeros(n)
    mu = params.mu if "regularization" in comps else 0.0
    nb = 1.0 if "neighborhood" in comps else 0.0
    return alpha, lam, mu, nb


def _step_deltas(params, cfg, nnz, deltas):
    deltas = params.deltas if deltas is None else deltas
    if deltas is None:
        return [np.zeros(nnz)] * (cfg.steps - 1)
    if len(deltas) != cfg.steps - 1 or any(np.shape(d) != (nnz,) for d in deltas):
        issue(
            "Dynamic mode needs {} weight deltas of {} entries each.".format(cfg.steps - 1, nnz),
            "error",
            ShapeError,
        )
    return deltas


def forward(g, h, params, cfg, deltas=None):
    """
    Run the model. Returns (predictions, trajectory, cache); ``cache`` keeps
    everything ``backward`` needs.

    In dynamic mode with the loss delta source, W(t+1) follows the constant
    delta ``deltas[t]`` (default ``params.deltas``, else zero).
    """
    ctx = graph_context(g)
    h = check_features(h, "node features")
    if h.shape[0] != ctx.n:
        issue("Features have {} rows for {} nodes.".format(h.shape[0], ctx.n), "error", ShapeError)
    rows, cols = ctx.rows, ctx.cols

    x0 = np.tanh(h @ params.theta_w + params.theta_b)
    alpha, lam, mu, nb = _effective(params, cfg, ctx.n)
    lam_col = lam[:, None]
    dynamic = cfg.mode == "dynamic"
    energy = cfg.delta_source == ENERGY_DELTA
    if dynamic and not energy:
        deltas = _step_deltas(params, cfg, ctx.pattern.nnz, deltas)

    w_data = [_row_softmax(params.edge_logits, ctx)]
    xs, ps, qs, inners, traces, step_deltas = [x0], [], [], [], [], []
    x = x0
    for t in range(cfg.steps):
        w = ctx.matrix(w_data[t if dynamic else 0])
        p = spmm(w, x)
        q = spmm(ctx.lg, x)
        inner = nb * p - mu * q
        x_next = alpha * x + (1.0 - alpha) * (lam_col * x0 + (1.0 - lam_col) * inner)
        if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > DIVERGENCE_LIMIT:
            issue("Non-finite activations at diffusion step {}.".format(t + 1), "error", DivergenceError, step=t + 1)

        if dynamic and t + 1 < cfg.steps:
            if energy:
                # Descend the local disagreement energy 1/2 |X - W X|^2 on the W support.
                u = x - p
                d = np.einsum("ij,ij->i", u[rows], x[cols])
            else:
                u, d = None, deltas[t]
            new_w, trace = evolve_data(w_data[t], d, rows, ctx.n, t, cfg.max_delta_norm)
            trace["u"] = u
            w_data.append(new_w)
            traces.append(trace)

        ps.append(p)
        qs.append(q)
        inners.append(inner)
        step_deltas.append(_relative_change(x_next, x))
        xs.append(x_next)
        x = x_next

    y = x @ params.readout_w + params.readout_b
    pred = expit(y) if cfg.readout == "sigmoid" else y

    m_data = [(1.0 - lam)[rows] * (nb * wd - mu * ctx.l_data) for wd in w_data]
    cache = {
        "ctx": ctx,
        "cfg": cfg,
        "params": params,
        "h": h,
        "x0": x0,
        "xs": xs,
        "ps": ps,
        "qs": qs,
        "inners": inners,
        "w_data": w_data,
        "traces": traces,
        "m_data": m_data,
        "m_sequence": [ctx.matrix(md) for md in m_data],
        "effective": (alpha, lam, mu, nb),
        "pred": pred,
    }
    return pred, Trajectory(snapshots=xs, step_deltas=step_deltas), cache


def _as_index(mask, n):
    mask = np.asarray(mask)
    idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.int64)
    if idx.size == 0:
        issue("The evaluation mask selects no nodes.", "error", ConfigError, field="mask")
    if idx.min() < 0 or idx.max() >= n:
        issue("The mask refers to nodes outside the graph.", "error", ShapeError)
    return idx


def _regression_targets(predictions, targets):
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size != predictions.size:
        issue(
            "{} targets for {} predictions.".format(targets.size, predictions.size),
            "error",
            ShapeError,
        )
    return targets.reshape(predictions.shape)


def _task_loss(predictions, targets, idx, task):
    if task == CLASSIFICATION:
        labels = np.asarray(targets, dtype=np.int64).ravel()
        if labels.shape[0] != predictions.shape[0]:
            issue("{} labels for {} nodes.".format(labels.shape[0], predictions.shape[0]), "error", ShapeError)
        logp = log_softmax(predictions[idx], axis=1)
        return float(-np.mean(logp[np.arange(len(idx)), labels[idx]]))
    y = _regression_targets(predictions, targets)
    return float(np.mean(np.abs(predictions[idx] - y[idx])))


def loss(predictions, targets, mask, m_sequence, task=CLASSIFICATION, margin=1.0):
    """Task loss on the masked nodes plus the norm-bound hinge over ``m_sequence``."""
    predictions = np.asarray(predictions, dtype=np.float64)
    idx = _as_index(mask, predictions.shape[0])
    task_loss = _task_loss(predictions, targets, idx, task)
    reg = reg_loss(m_sequence, margin)
    return TrainLoss(task_loss=task_loss, reg_loss=reg, total=task_loss + reg)


def loss_gradient(predictions, targets, mask, task=CLASSIFICATION):
    """Gradient of the task loss with respect to the predictions."""
    predictions = np.asarray(predictions, dtype=np.float64)
    idx = _as_index(mask, predictions.shape[0])
    grad = np.zeros_like(predictions)
    if task == CLASSIFICATION:
        labels = np.asarray(targets, dtype=np.int64).ravel()
        probs = softmax(predictions[idx], axis=1)
        probs[np.arange(len(idx)), labels[idx]] -= 1.0
        grad[idx] = probs / len(idx)
    else:
        y = _regression_targets(predictions, targets)
        grad[idx] = np.sign(predictions[idx] - y[idx]) / predictions[idx].size
    return grad


def _hinge_bound_grad(m_data, rows, cols, n, margin):
    """Subgradient of max(0, sqrt(|M|_1 |M|_inf) - margin) w.r.t. the stored entries (None if inactive)."""
    a = np.abs(m_data)
    col_sums = np.bincount(cols, weights=a, minlength=n)
    row_sums = np.bincount(rows, weights=a, minlength=n)
    norm1, norm_inf = col_sums.max(), row_sums.max()
    bound = np.sqrt(norm1 * norm_inf)
    if bound <= margin or bound == 0.0:
        return None
    sign = np.sign(m_data)
    d_norm1 = np.where(cols == np.argmax(col_sums), sign, 0.0)
    d_norm_inf = np.where(rows == np.argmax(row_sums), sign, 0.0)
    return (norm_inf * d_norm1 + norm1 * d_norm_inf) / (2.0 * bound)


def _evolve_backward(g_out, trace):
    """Pull a gradient on W(t+1) back to W(t) and to the raw delta."""
    rows, n = trace["rows"], trace["n"]
    if trace["capped"]:
        move, move_norm = trace["move"], trace["move_norm"]
        c = trace["cap"] / move_norm
        g_move = c * (g_out - move * np.dot(move, g_out) / move_norm ** 2)
        g_w = g_out - g_move
        g_proj = g_move
    else:
        g_w = np.zeros_like(g_out)
        g_proj = g_out

    sums = trace["sums"]
    s = np.bincount(rows, weights=g_proj * trace["projected"], minlength=n)
    g_raw = (g_proj - s[rows]) / sums[rows] * (trace["raw"] > 0.0)
    g_w = g_w + g_raw

    g_clipped = trace["eta"] * g_raw
    d, d_norm, k = trace["d"], trace["d_norm"], trace["k"]
    if d_norm > k:
        g_d = (k / d_norm) * (g_clipped - d * np.dot(d, g_clipped) / d_norm ** 2)
    else:
        g_d = g_clipped
    return g_w, g_d


def backward(cache, d_pred, include_reg=True):
    """
    Exact gradients of (task loss + hinge penalty) w.r.t. every parameter.
    ``d_pred`` is the task-loss gradient w.r.t. the predictions. Returns a
    ModelParams holding the gradients.
    """
    if not cache:
        issue("backward() needs the cache produced by forward().", "error", OpinionFlowError)

    ctx, cfg, params = cache["ctx"], cache["cfg"], cache["params"]
    rows, cols, n = ctx.rows, ctx.cols, ctx.n
    alpha, lam, mu, nb = cache["effective"]
    xs, w_data, x0 = cache["xs"], cache["w_data"], cache["x0"]
    pred = cache["pred"]
    dynamic = cfg.mode == "dynamic"

    d_pred = np.asarray(d_pred, dtype=np.float64).reshape(pred.shape)
    dy = d_pred * pred * (1.0 - pred) if cfg.readout == "sigmoid" else d_pred
    g_readout_w = xs[-1].T @ dy
    g_readout_b = dy.sum(axis=0)
    gx = dy @ params.readout_w.T

    g_wd = [np.zeros_like(wd) for wd in w_data]
    g_lam = np.zeros(n)
    g_mu = 0.0
    g_x0 = np.zeros_like(x0)

    if include_reg:
        for t, md in enumerate(cache["m_data"]):
            g_m = _hinge_bound_grad(md, rows, cols, n, cfg.margin)
            if g_m is None:
                continue
            scale = (1.0 - lam)[rows]
            g_wd[t] += nb * scale * g_m
            g_lam -= np.bincount(rows, weights=g_m * (nb * w_data[t] - mu * ctx.l_data), minlength=n)
            g_mu -= float(np.sum(g_m * scale * ctx.l_data))

    energy = cfg.delta_source == ENERGY_DELTA
    lam_col = lam[:, None]
    for t in reversed(range(cfg.steps)):
        xt = xs[t]
        wi = t if dynamic else 0
        w = ctx.matrix(w_data[wi])
        g_prev = alpha * gx

        if dynamic and t + 1 < cfg.steps:
            trace = cache["traces"][t]
            g_w_from_next, g_d = _evolve_backward(g_wd[t + 1], trace)
            g_wd[t] += g_w_from_next
            if energy and not cfg.freeze_schedule:
                g_dmat = ctx.matrix(g_d)
                u = trace["u"]
                g_u = spmm(g_dmat, xt)
                g_prev += spmm(g_dmat.T.tocsr(), u) + g_u - spmm(w.T.tocsr(), g_u)
                g_wd[t] -= np.einsum("ij,ij->i", g_u[rows], xt[cols])

        gp = (1.0 - alpha) * gx
        g_x0 += lam_col * gp
        g_lam += np.sum(gp * (x0 - cache["inners"][t]), axis=1)
        r = (1.0 - lam_col) * gp
        if nb:
            g_wd[wi] += np.einsum("ij,ij->i", r[rows], xt[cols])
            g_prev += spmm(w.T.tocsr(), r)
        g_mu -= float(np.sum(r * cache["qs"][t]))
        g_prev -= mu * spmm(ctx.lg.T.tocsr(), r)
        gx = g_prev

    g_x0 += gx
    cache["w_grads"] = g_wd

    w0 = w_data[0]
    s = np.bincount(rows, weights=w0 * g_wd[0], minlength=n)
    g_edge = w0 * (g_wd[0] - s[rows])

    comps = cfg.components
    lam_full = params.lam
    g_lambda_logits = g_lam * lam_full * (1.0 - lam_full) if "attachment" in comps else np.zeros(n)
    g_mu_logit = np.array([g_mu * expit(params.mu_logit[0])]) if "regularization" in comps else np.zeros(1)

    dz = g_x0 * (1.0 - x0 ** 2)
    return ModelParams(
        theta_w=cache["h"].T @ dz,
        theta_b=dz.sum(axis=0),
        readout_w=g_readout_w,
        readout_b=g_readout_b,
        lambda_logits=g_lambda_logits,
        mu_logit=g_mu_logit,
        edge_logits=g_edge,
        alpha=params.alpha,
    )


def objective(g, h, targets, mask, params, cfg):
    """Forward pass plus total loss; returns (TrainLoss, cache, d_pred)."""
    pred, _, cache = forward(g, h, params, cfg)
    tl = loss(pred, targets, mask, cache["m_sequence"], cfg.task, cfg.margin)
    return tl, cache, loss_gradient(pred, targets, mask, cfg.task)


def _metric(pred, targets, idx, task):
    if task == CLASSIFICATION:
        labels = np.asarray(targets, dtype=np.int64).ravel()
        return float(np.mean(np.argmax(pred[idx], axis=1) == labels[idx]))
    y = _regression_targets(pred, targets)
    return float(np.mean(np.abs(pred[idx] - y[idx])))


def evaluate(params, g, h, targets, mask, cfg):
    """Accuracy (classification) or mean absolute error (regression) over ``mask``."""
    pred, _, _ = forward(g, h, params, cfg)
    idx = _as_index(mask, pred.shape[0])
    return _metric(pred, targets, idx, cfg.task)


def mean_baseline_mae(targets, train_mask, eval_mask):
    """MAE of always predicting the training-target mean."""
    y = np.asarray(targets, dtype=np.float64)
    n = y.shape[0]
    tr = _as_index(train_mask, n)
    ev = _as_index(eval_mask, n)
    return float(np.mean(np.abs(y[ev] - y[tr].mean(axis=0))))


def split_nodes(n, fractions, rng):
    """Random (train, val, test) boolean masks with the given fractions."""
    order = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    if n >= 3:
        n_train = min(max(n_train, 1), n - 2)
        n_val = min(max(n_val, 1), n - n_train - 1)
    masks = []
    for part in (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]):
        mask = np.zeros(n, dtype=bool)
        mask[part] = True
        masks.append(mask)
    return tuple(masks)


def kfold_masks(n, folds, rng):
    """One (train, val, test) triple per fold: fold i tests, fold i+1 validates, the rest trains."""
    if folds < 3 or folds > n:
        issue("Need 3 <= folds <= n (got {}).".format(folds), "error", ConfigError, field="folds")
    parts = np.array_split(rng.permutation(n), folds)
    out = []
    for i in range(folds):
        test = np.zeros(n, dtype=bool)
        val = np.zeros(n, dtype=bool)
        test[parts[i]] = True
        val[parts[(i + 1) % folds]] = True
        out.append((~(test | val), val, test))
    return out


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_metric: float
    reg_loss: float
    max_bound: float


@dataclass
class History:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    masks: tuple = None

    def csv(self):
        header = ["epoch", "train_loss", "val_loss", "val_metric", "reg_loss", "max_bound"]
        return csv_text(header, [(r.epoch, r.train_loss, r.val_loss, r.val_metric, r.reg_loss, r.max_bound) for r in self.records])


def _n_outputs(targets, cfg):
    if cfg.task == CLASSIFICATION:
        return int(cfg.n_classes or int(np.max(targets)) + 1)
    y = np.asarray(targets)
    return 1 if y.ndim == 1 else int(y.shape[1])


def _descend(params, grads, lr, weight_decay, state=None):
    """
    One update of every parameter array. With ``state`` (a dict kept across
    calls) the step is Adam's bias-corrected moment ratio instead of the raw
    gradient.
    """
    new = params.copy()
    if state is not None:
        state["t"] = state.get("t", 0) + 1
    b1, b2 = ADAM_BETAS
    for name, value in new.arrays().items():
        step = getattr(grads, name)
        if weight_decay and name in ("theta_w", "readout_w"):
            step = step + weight_decay * value
        if state is not None:
            m, v = state.get(name, (np.zeros_like(value), np.zeros_like(value)))
            m = b1 * m + (1.0 - b1) * step
            v = b2 * v + (1.0 - b2) * step ** 2
            state[name] = (m, v)
            t = state["t"]
            step = (m / (1.0 - b1 ** t)) / (np.sqrt(v / (1.0 - b2 ** t)) + ADAM_EPS)
        value -= lr * step
    return new


def _initial_level(targets, train_mask, n_outputs, cfg):
    if cfg.task != REGRESSION:
        return None
    y = np.asarray(targets, dtype=np.float64).reshape(-1, n_outputs)
    level = np.median(y[_as_index(train_mask, y.shape[0])], axis=0)
    if cfg.readout == "sigmoid":
        level = logit(np.clip(level, LEVEL_CLIP, 1.0 - LEVEL_CLIP))
    return level


def train(g, h, targets, cfg, masks=None):
    """
    Full-batch training with plain gradient descent or Adam. Returns the
    parameters of the epoch with the best validation metric and the
    per-epoch History.

    Regression readouts start at the median training target. In dynamic
    mode with the loss delta source, each epoch's per-step W gradients
    become the next epoch's weight deltas.
    """
    ctx = graph_context(g)
    h = check_features(h, "node features")
    rng = np.random.default_rng(cfg.seed)
    if masks is None:
        masks = split_nodes(ctx.n, cfg.split, rng)
    train_mask, val_mask = masks[0], masks[1]
    if not np.any(val_mask):
        val_mask = train_mask

    n_outputs = _n_outputs(targets, cfg)
    level = _initial_level(targets, train_mask, n_outputs, cfg)
    params = init_params(ctx, h.shape[1], n_outputs, cfg, rng, level=level)
    history = History(masks=tuple(masks))
    best, best_metric = params.copy(), None
    higher_is_better = cfg.task == CLASSIFICATION
    adam = {} if cfg.optimizer == "adam" else None
    loss_deltas = cfg.mode == "dynamic" and cfg.delta_source == LOSS_DELTA

    for epoch in range(1, cfg.epochs + 1):
        try:
            pred, _, cache = forward(ctx, h, params, cfg)
        except DivergenceError as e:
            issue("Training diverged in epoch {}: {}".format(epoch, e), "error", DivergenceError, step=epoch)
        tl = loss(pred, targets, train_mask, cache["m_sequence"], cfg.task, cfg.margin)
        if not np.isfinite(tl.total):
            issue("Training loss became non-finite in epoch {}.".format(epoch), "error", DivergenceError, step=epoch)

        val_idx = _as_index(val_mask, ctx.n)
        metric = _metric(pred, targets, val_idx, cfg.task)
        record = EpochRecord(
            epoch=epoch,
            train_loss=tl.total,
            val_loss=_task_loss(pred, targets, val_idx, cfg.task),
            val_metric=metric,
            reg_loss=tl.reg_loss,
            max_bound=max(op_norm_bound(m) for m in cache["m_sequence"]),
        )
        history.records.append(record)
        logger.debug(
            "epoch %d: loss %.6f val %.6f metric %.4f reg %.4f",
            epoch, record.train_loss, record.val_loss, metric, record.reg_loss,
        )

        improved = best_metric is None or (metric > best_metric if higher_is_better else metric < best_metric)
        if improved:
            best, best_metric, history.best_epoch = params.copy(), metric, epoch

        grads = backward(cache, loss_gradient(pred, targets, train_mask, cfg.task))
        params = _descend(params, grads, cfg.lr, cfg.weight_decay, adam)
        if loss_deltas:
            params.deltas = [-gw for gw in cache["w_grads"][:-1]]

    return best, history


def stubbornness_histogram(params, bins=10):
    """Counts of learned stubbornness values in ``bins`` equal bins on [0, 1]."""
    counts, edges = np.histogram(params.lam, bins=bins, range=(0.0, 1.0))
    return counts, edges


def save_checkpoint(path, params, cfg, extra=None):
    """
    Write a checkpoint: magic, 8-byte little-endian header length, a JSON
    header (shapes, config, seed), then every array as little-endian float64
    in FIELD_ORDER, then any dynamic-mode weight deltas.
    """
    header = {
        "fields": [[name, list(value.shape)] for name, value in params.arrays().items()],
        "alpha": params.alpha,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
    }
    if extra:
        header["extra"] = extra
    arrays = list(params.arrays().values())
    if params.deltas is not None:
        header["deltas"] = len(params.deltas)
        arrays += list(params.deltas)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in arrays)
    write_atomic_bytes(path, CHECKPOINT_MAGIC + len(head).to_bytes(8, "little") + head + body)


def load_checkpoint(path):
    """Return (ModelParams, TrainConfig) from a checkpoint written by save_checkpoint."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(CHECKPOINT_MAGIC):
        issue("{} is not a checkpoint file.".format(path), "error", ParseError)
    offset = len(CHECKPOINT_MAGIC)
    head_len = int.from_bytes(data[offset : offset + 8], "little")
    offset += 8
    header = json.loads(data[offset : offset + head_len].decode("utf-8"))
    offset += head_len

    arrays = {}
    for name, shape in header["fields"]:
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    deltas = None
    if "deltas" in header:
        nnz = arrays["edge_logits"].size
        deltas = []
        for _ in range(header["deltas"]):
            deltas.append(np.frombuffer(data, dtype="<f8", count=nnz, offset=offset).astype(np.float64))
            offset += 8 * nnz
    if offset != len(data):
        issue("{} has trailing or missing bytes.".format(path), "error", ParseError)
    return ModelParams(alpha=header["alpha"], deltas=deltas, **arrays), TrainConfig.from_dict(header["config"])
