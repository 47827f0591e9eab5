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
Batch experiment driver: diffusion runs, training, cascade simulation,
consensus demonstrations and step-time benchmarks. Every command reads one
JSON config, lets command-line flags override it and writes CSV/JSON files
into the output directory.
"""

import argparse as ap
import importlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .common import (
    ConfigError,
    DivergenceError,
    OpinionFlowError,
    ParseError,
    csv_text,
    is_xlsx,
    issue,
    json_text,
    read_feature_matrix,
    read_labels,
    config_items,
    config_value,
    set_debug_level,
    typed_fields,
    write_atomic,
)
from .consensus import (
    INDIVIDUALIZED,
    MULTI,
    SINGLE,
    classify_convergence,
    verify_theorem_conditions,
)
from .diffusion import (
    COMPONENTS,
    CONVERGENCE_TOL,
    DiffusionParams,
    WeightSchedule,
    diffusion_step,
    energy_schedule,
    run_diffusion,
    snapshot_csv,
    trajectory_csv,
)
from .generators import (
    community_features,
    generate_bench_graph,
    generate_sbm,
    heterophily_labels,
    influence_features,
)
from .graph import build_graph, edge_homophily, normalized_laplacian, uniform_row_stochastic
from .influence import CascadeConfig, SEED_FRACTION, probabilities_csv, random_seed_set, simulate
from .pckg_info import __version__
from .train import (
    REGRESSION,
    CLASSIFICATION,
    TrainConfig,
    evaluate,
    kfold_masks,
    mean_baseline_mae,
    save_checkpoint,
    stubbornness_histogram,
    train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_MISMATCH = 4

ALPHA_GRID = (0.1, 0.3, 0.6, 0.9)
DEFAULT_FOLDS = 10
DEFAULT_SBM = {"n": 50, "k": 5, "p_in": 0.5, "p_out": 0.02}

DIFFUSION_KEYS = {
    "alpha",
    "lambda",
    "mu",
    "steps",
    "components",
    "mode",
    "delta",
    "self_weight",
    "max_delta_norm",
    "tolerance",
    "solve_fixed_point",
}


@dataclass
class ExperimentConfig:
    """
    Settings shared by every command plus the command-specific sections.
    Sections are plain dicts turned into DiffusionParams, TrainConfig or
    CascadeConfig by the command that uses them.
    """

    graph: dict = field(default_factory=dict)
    features: str = None
    targets: str = None
    dim: int = 1
    seed: int = 0
    threads: int = 1
    out: str = "."
    diffusion: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    cascade: dict = field(default_factory=dict)
    alpha_grid: list = None
    ablate: list = field(default_factory=list)
    folds: int = DEFAULT_FOLDS
    bench: dict = field(default_factory=dict)
    demo: dict = field(default_factory=dict)

    def __post_init__(self):
        def bad(field_name, msg):
            issue("{}: {}".format(field_name, msg), "error", ConfigError, field=field_name)

        if int(self.threads) != self.threads or self.threads < 1:
            bad("threads", "must be a positive count")
        if int(self.dim) != self.dim or self.dim < 1:
            bad("dim", "must be a positive count")
        if int(self.folds) != self.folds or self.folds < 3:
            bad("folds", "must be at least 3")
        for name in ("features", "targets"):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                bad(name, "no such file {}".format(path))
        graph_file = config_value(self.graph.get("file"), str, "graph")
        config_value(self.graph.get("nodes"), int, "graph")
        config_value(self.graph.get("sbm"), dict, "graph")
        if graph_file is not None and not os.path.isfile(graph_file):
            bad("graph", "no such file {}".format(graph_file))
        unknown = set(self.graph) - {"file", "nodes", "sbm"}
        if unknown:
            bad("graph", "unknown keys {}".format(sorted(unknown)))
        if os.path.isfile(self.out):
            bad("out", "{} is a file, not a directory".format(self.out))
        self.ablate = config_items(self.ablate, str, "ablate")
        if set(self.ablate) - set(COMPONENTS):
            bad("ablate", "unknown components {}".format(sorted(set(self.ablate) - set(COMPONENTS))))
        if self.alpha_grid is True:
            self.alpha_grid = list(ALPHA_GRID)
        if self.alpha_grid is not None:
            self.alpha_grid = config_items(self.alpha_grid, float, "alpha_grid")

    @classmethod
    def from_dict(cls, d):
        if d.get("alpha_grid") is True:
            d = dict(d, alpha_grid=list(ALPHA_GRID))
        return cls(**typed_fields(cls, d, "config"))


def scan_for_readers():
    """Look for modules that read graph files."""

    trailer = "_reader.py"  # Reader file names always end with this.
    readers = {}
    for dir in [os.path.dirname(os.path.abspath(__file__)), "."]:
        for f in os.listdir(dir):
            if f.endswith(trailer):
                reader_name = f.replace(trailer, "")
                readers[reader_name] = dir
    return readers


def load_reader(name, readers):
    """Import the named reader module and return its reader function."""
    reader_module_name = name + "_reader"
    reader_dir = readers[name]
    if reader_dir == ".":
        sys.path.append(reader_dir)
        reader_module = importlib.import_module(reader_module_name)
    else:
        reader_module = importlib.import_module("opinionflow." + reader_module_name)
    return getattr(reader_module, reader_module_name)


def read_graph(filename, reader_name=None, nodes=None, readers=None):
    """Read an edge file with a reader plug-in. Node count defaults to the largest id + 1."""
    readers = readers or scan_for_readers()
    if reader_name is None:
        reader_name = "xlsx" if is_xlsx(filename) else "edgelist"
    if reader_name not in readers:
        issue("No reader named '{}'.".format(reader_name), "error", ConfigError, field="reader")
    reader = load_reader(reader_name, readers)
    file_type = os.path.splitext(filename)[-1].lower()
    mode = "rb" if file_type == ".xlsx" else "r"
    with open(filename, mode) as edge_file:
        edges = list(reader(edge_file, filename, file_type))
    if nodes is None:
        nodes = 1 + max((max(u, v) for u, v in edges), default=-1)
    logger.info("Read %d edges over %d nodes from %s.", len(edges), nodes, filename)
    return build_graph(edges, nodes)


def section_settings(defaults, section, what):
    """
    Merge a config section over its defaults. Keys must be known and values
    must have the type of their default; ConfigError names the offender.
    """
    merged = dict(defaults)
    for key, value in section.items():
        if key not in defaults:
            issue("Unknown {} setting '{}'.".format(what, key), "error", ConfigError, field=key)
        merged[key] = config_value(value, type(defaults[key]), key)
    return merged


def load_graph(exp, reader_name=None, default_sbm=None):
    """Return (graph, community labels or None) for the config's graph section."""
    if "file" in exp.graph:
        return read_graph(exp.graph["file"], reader_name, exp.graph.get("nodes")), None
    sbm = section_settings(dict(default_sbm or DEFAULT_SBM), exp.graph.get("sbm", {}), "graph")
    return generate_sbm(sbm["n"], sbm["k"], sbm["p_in"], sbm["p_out"], seed=exp.seed)


def diffusion_settings(section, n):
    """Validate a diffusion section and return (params, weight settings, tolerance, solve flag)."""
    unknown = set(section) - DIFFUSION_KEYS
    if unknown:
        issue("Unknown diffusion setting '{}'.".format(sorted(unknown)[0]), "error", ConfigError, field=sorted(unknown)[0])
    lam = section.get("lambda", 0.5)
    if isinstance(lam, (list, tuple)):
        lam = np.array(config_items(lam, float, "lambda"))
    else:
        lam = np.full(n, config_value(lam, float, "lambda"))
    if lam.shape != (n,):
        issue("lambda needs one value per node ({} given for {}).".format(lam.size, n), "error", ConfigError, field="lambda")
    params = DiffusionParams(
        alpha=config_value(section.get("alpha", 0.3), float, "alpha"),
        lam=lam,
        mu=config_value(section.get("mu", 0.1), float, "mu"),
        steps=config_value(section.get("steps", 100), int, "steps"),
        components=config_items(section.get("components", COMPONENTS), str, "components"),
    )
    weights = {
        "mode": config_value(section.get("mode", "static"), str, "mode"),
        "delta": config_value(section.get("delta", "zero"), str, "delta"),
        "self_weight": config_value(section.get("self_weight", 0.0), float, "self_weight"),
        "max_delta_norm": config_value(section.get("max_delta_norm", 1.0), float, "max_delta_norm"),
    }
    if weights["mode"] not in ("static", "dynamic"):
        issue("mode must be 'static' or 'dynamic'.", "error", ConfigError, field="mode")
    if weights["delta"] not in ("zero", "energy"):
        issue("delta must be 'zero' or 'energy'.", "error", ConfigError, field="delta")
    tol = config_value(section.get("tolerance", CONVERGENCE_TOL), float, "tolerance")
    if not tol > 0:
        issue("tolerance must be > 0.", "error", ConfigError, field="tolerance")
    return params, weights, tol, config_value(section.get("solve_fixed_point", False), bool, "solve_fixed_point")


def initial_state(exp, n):
    if exp.features:
        x0 = read_feature_matrix(exp.features)
        if x0.shape[0] != n:
            issue("{} has {} rows for {} nodes.".format(exp.features, x0.shape[0], n), "error", ConfigError, field="features")
        return x0
    return np.random.default_rng(exp.seed).standard_normal((n, exp.dim))


def train_config(exp, task, **defaults):
    section = dict(defaults)
    section.update(exp.train)
    section["task"] = task
    section.setdefault("seed", exp.seed)
    if exp.ablate:
        section["components"] = [c for c in section.get("components", COMPONENTS) if c not in exp.ablate]
    return TrainConfig.from_dict(section)


def cascade_config(exp, n):
    section = dict(exp.cascade)
    section.setdefault("rng_seed", exp.seed)
    fraction = section.pop("seed_fraction", SEED_FRACTION)
    if not section.get("seed_set"):
        section["seed_set"] = random_seed_set(n, fraction, exp.seed).tolist()
    return CascadeConfig.from_dict(section)


@contextmanager
def stage(name):
    """Tag errors raised inside a pipeline stage with the stage name."""
    try:
        yield
    except OpinionFlowError as e:
        logger.error("Stage '%s' failed: %s", name, e)
        if getattr(e, "stage", None) is None:
            e.stage = name
            e.args = ("[{}] {}".format(name, e.args[0] if e.args else ""),) + tuple(e.args[1:])
        raise


class Outputs(object):
    """Collects rendered output files and writes them only once everything succeeded."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def write(self):
        for name in sorted(self.files):
            write_atomic(os.path.join(self.out_dir, name), self.files[name])
            logger.info("Wrote %s.", os.path.join(self.out_dir, name))


def cmd_diffuse(exp, args):
    g, _ = load_graph(exp, args.reader)
    params, weights, tol, solve = diffusion_settings(exp.diffusion, g.n)
    x0 = initial_state(exp, g.n)
    lg = normalized_laplacian(g)
    base = uniform_row_stochastic(g, weights["self_weight"])
    if weights["mode"] == "dynamic" and weights["delta"] == "energy":
        schedule = energy_schedule(x0, params, base, lg, weights["max_delta_norm"])
    elif weights["mode"] == "dynamic":
        schedule = WeightSchedule.dynamic(base, steps=params.steps, max_delta_norm=weights["max_delta_norm"])
    else:
        schedule = WeightSchedule.static(base)

    traj, report = run_diffusion(x0, g, params, schedule, tol=tol, lg=lg, solve_fixed_point=solve)
    consensus = classify_convergence(traj.final, converged=report.converged)
    logger.info("Diffusion %s after %d steps (final delta %.3e).",
                "converged" if report.converged else "did not converge", params.steps, report.final_delta)

    outputs = Outputs(exp.out)
    outputs.add("trajectory.csv", trajectory_csv(traj, report))
    outputs.add("final_state.csv", snapshot_csv(traj.final))
    outputs.add(
        "convergence.json",
        json_text({
            "report": report.to_dict(),
            "consensus": consensus.to_dict(),
            "seed": exp.seed,
            "threads": exp.threads,
        }),
    )
    outputs.write()
    return EXIT_OK


def cmd_train_nc(exp, args):
    g, communities = load_graph(exp, args.reader, {"n": 40, "k": 2, "p_in": 0.5, "p_out": 0.02})
    labels = read_labels(exp.targets) if exp.targets else communities
    if labels is None:
        issue("train-nc needs a targets file for a graph read from disk.", "error", ConfigError, field="targets")
    if labels.shape[0] != g.n:
        issue("{} labels for {} nodes.".format(labels.shape[0], g.n), "error", ConfigError, field="targets")
    h = read_feature_matrix(exp.features) if exp.features else community_features(labels, rng=exp.seed)
    cfg = train_config(exp, CLASSIFICATION, n_classes=int(labels.max()) + 1)
    grid = exp.alpha_grid or [cfg.alpha]
    configs = [TrainConfig.from_dict(dict(cfg.to_dict(), alpha=a)) for a in grid]

    outputs = Outputs(exp.out)
    results = []
    for index, run_cfg in enumerate(configs):
        params, history = train(g, h, labels, run_cfg)
        test_acc = evaluate(params, g, h, labels, history.masks[2], run_cfg)
        val_acc = history.records[history.best_epoch - 1].val_metric
        results.append({
            "alpha": run_cfg.alpha,
            "best_epoch": history.best_epoch,
            "val_accuracy": val_acc,
            "test_accuracy": test_acc,
            "mu": params.mu,
            "param_count": params.count(),
        })
        logger.info("alpha %g: val %.4f test %.4f", run_cfg.alpha, val_acc, test_acc)
        outputs.add("history_{}.csv".format(index), history.csv())
        if index == 0:
            counts, edges = stubbornness_histogram(params)
            outputs.add(
                "stubbornness.csv",
                csv_text(["bin_low", "bin_high", "count"], [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]),
            )
            best_params, best_cfg = params, run_cfg

    outputs.add(
        "results.csv",
        csv_text(
            ["alpha", "best_epoch", "val_accuracy", "test_accuracy", "mu", "param_count"],
            [[r[k] for k in ("alpha", "best_epoch", "val_accuracy", "test_accuracy", "mu", "param_count")] for r in results],
        ),
    )
    outputs.add(
        "summary.json",
        json_text({
            "edge_homophily": edge_homophily(g, labels),
            "results": results,
            "config": cfg.to_dict(),
            "threads": exp.threads,
        }),
    )
    outputs.write()
    save_checkpoint(os.path.join(exp.out, "model.ckpt"), best_params, best_cfg)
    return EXIT_OK


def cmd_influence(exp, args):
    """Simulate ground truth, then train and score a regression model per fold."""
    g, _ = load_graph(exp, args.reader)
    cascade = cascade_config(exp, g.n)
    cfg = train_config(exp, REGRESSION, readout="sigmoid", optimizer="adam", lr=0.02)
    if exp.folds > g.n:
        issue("folds ({}) exceeds the node count ({}).".format(exp.folds, g.n), "error", ConfigError, field="folds")

    with stage("simulate"):
        targets = simulate(g, cascade)
    h = influence_features(g, cascade.seed_set)

    folds = []
    with stage("train"):
        for index, masks in enumerate(kfold_masks(g.n, exp.folds, np.random.default_rng(exp.seed))):
            params, history = train(g, h, targets, cfg, masks=masks)
            folds.append({
                "fold": index,
                "test_mae": evaluate(params, g, h, targets, masks[2], cfg),
                "baseline_test_mae": mean_baseline_mae(targets, masks[0], masks[2]),
                "train_mae": evaluate(params, g, h, targets, masks[0], cfg),
                "baseline_train_mae": mean_baseline_mae(targets, masks[0], masks[0]),
            })
            logger.info("fold %d: test MAE %.4f baseline %.4f", index, folds[-1]["test_mae"], folds[-1]["baseline_test_mae"])

    def stats(key):
        values = np.array([f[key] for f in folds])
        return {"mean": float(values.mean()), "std": float(values.std())}

    outputs = Outputs(exp.out)
    outputs.add("ground_truth.csv", probabilities_csv(targets))
    outputs.add(
        "influence.json",
        json_text({
            "cascade": cascade.to_dict(),
            "folds": folds,
            "model_mae": stats("test_mae"),
            "baseline_mae": stats("baseline_test_mae"),
            "config": cfg.to_dict(),
            "threads": exp.threads,
        }),
    )
    outputs.write()
    return EXIT_OK


def cmd_simulate(exp, args):
    g, _ = load_graph(exp, args.reader)
    cascade = cascade_config(exp, g.n)
    probs = simulate(g, cascade)
    outputs = Outputs(exp.out)
    outputs.add("ground_truth.csv", probabilities_csv(probs))
    outputs.add("ground_truth.json", json_text({"cascade": cascade.to_dict(), "nodes": g.n, "edges": g.m}))
    outputs.write()
    return EXIT_OK


def _sbm_with_blocks(n, k, p_in, p_out, seed, whole=False, attempts=100):
    """An SBM whose communities (or whole graph) are connected, trying successive seeds."""
    for attempt in range(attempts):
        g, labels = generate_sbm(n, k, p_in, p_out, seed=seed * attempts + attempt)
        if whole:
            ok = g.is_connected()
        else:
            ok = all(
                connected_components(g.csr[labels == c][:, labels == c], directed=False)[0] == 1
                for c in range(k)
            )
        if ok:
            return g, labels
    issue("Could not draw a suitably connected SBM in {} tries.".format(attempts), "error", ConfigError, field="demo")


def consensus_scenarios(exp):
    """The four (name, graph, labels, params, W, x0, expected kind) consensus demonstrations."""
    demo = section_settings(
        {"n": 50, "k": 5, "p_in": 0.5, "p_out": 0.1, "steps": 2000, "individual_lambda": 0.99}, exp.demo, "demo"
    )
    n, k = demo["n"], demo["k"]
    rng = np.random.default_rng(exp.seed)
    scenarios = []

    g, labels = _sbm_with_blocks(n, k, demo["p_in"], demo["p_out"], exp.seed, whole=True)
    params = DiffusionParams.uniform(n, alpha=0.0, lam=0.0, mu=0.0, steps=demo["steps"])
    scenarios.append(("single", g, labels, params, uniform_row_stochastic(g, 0.5), rng.standard_normal((n, 1)), SINGLE))

    g, labels = _sbm_with_blocks(n, k, demo["p_in"], 0.0, exp.seed)
    params = DiffusionParams.uniform(n, alpha=0.0, lam=0.0, mu=0.0, steps=demo["steps"])
    w = uniform_row_stochastic(g, 0.5)
    x0 = (labels + 1.0 + 0.1 * rng.standard_normal(n)).reshape(-1, 1)
    scenarios.append(("multi-homophily", g, labels, params, w, x0, MULTI))

    colors = heterophily_labels(g, labels)
    sign = np.where((labels + colors) % 2 == 0, 1.0, -1.0)
    x0 = (labels + 1.0 + 0.5 * sign).reshape(-1, 1)
    scenarios.append(("multi-heterophily", g, colors, params, w, x0, MULTI))

    g, labels = _sbm_with_blocks(n, k, demo["p_in"], 0.02, exp.seed)
    params = DiffusionParams.uniform(n, alpha=0.3, lam=demo["individual_lambda"], mu=0.1, steps=200)
    scenarios.append(("individualized", g, labels, params, uniform_row_stochastic(g, 0.5), rng.standard_normal((n, 2)), INDIVIDUALIZED))
    return scenarios


def cmd_consensus_demo(exp, args):
    results = []
    failed = []
    for name, g, labels, params, w, x0, expected in consensus_scenarios(exp):
        lg = normalized_laplacian(g)
        schedule = WeightSchedule.static(w)
        checks = verify_theorem_conditions(params, schedule, lg, x0)
        traj, report = run_diffusion(x0, g, params, schedule, tol=CONVERGENCE_TOL, lg=lg)
        consensus = classify_convergence(traj.final, converged=report.converged)

        expected_k = {SINGLE: 1, INDIVIDUALIZED: g.n}.get(expected)
        if expected == MULTI:
            expected_k = next(c.expected_k for c in checks if c.name == "multi-consensus")
        ok = consensus.kind == expected and consensus.k == expected_k
        if not ok:
            failed.append(name)
            logger.error("Scenario '%s': expected %s(%s), got %s(%d).", name, expected, expected_k, consensus.kind, consensus.k)
        results.append({
            "scenario": name,
            "expected_kind": expected,
            "expected_k": expected_k,
            "consensus": consensus.to_dict(),
            "checks": [c.to_dict() for c in checks],
            "edge_homophily": edge_homophily(g, labels),
            "passed": ok,
        })

    outputs = Outputs(exp.out)
    outputs.add("consensus.json", json_text({"scenarios": results, "seed": exp.seed}))
    outputs.write()
    if failed:
        issue("Consensus scenarios failed: {}.".format(", ".join(failed)))
        return EXIT_MISMATCH
    return EXIT_OK


def time_step(g, dim, repeats, seed):
    """Median wall time in ns of one diffusion step on ``g`` with ``dim`` features."""
    rng = np.random.default_rng(seed)
    params = DiffusionParams.uniform(g.n, alpha=0.3, lam=0.5, mu=0.1, steps=1)
    w = uniform_row_stochastic(g, 0.5)
    lg = normalized_laplacian(g)
    x0 = rng.standard_normal((g.n, dim))
    x = x0
    times = []
    for _ in range(repeats):
        start = time.perf_counter_ns()
        x = diffusion_step(x, x0, w, lg, params)
        times.append(time.perf_counter_ns() - start)
    return float(np.median(times))


def cmd_bench(exp, args):
    bench = section_settings(
        {"n": 5000, "m0": 5000, "doublings": 4, "dim": 16, "dim_doublings": 0, "repeats": 21}, exp.bench, "bench"
    )
    rows = []
    for i in range(bench["doublings"] + 1):
        m = bench["m0"] * 2 ** i
        g = generate_bench_graph(bench["n"], m, seed=exp.seed)
        rows.append((m, bench["dim"], time_step(g, bench["dim"], bench["repeats"], exp.seed)))
        logger.info("m=%d: %.0f ns/step", m, rows[-1][2])
    if bench["dim_doublings"]:
        g = generate_bench_graph(bench["n"], bench["m0"], seed=exp.seed)
        for i in range(1, bench["dim_doublings"] + 1):
            dim = bench["dim"] * 2 ** i
            rows.append((bench["m0"], dim, time_step(g, dim, bench["repeats"], exp.seed)))

    outputs = Outputs(exp.out)
    outputs.add("bench.csv", csv_text(["m", "d", "ns_per_step"], rows))
    outputs.write()
    return EXIT_OK


COMMANDS = {
    "diffuse": cmd_diffuse,
    "train-nc": cmd_train_nc,
    "train-ie": cmd_influence,
    "simulate": cmd_simulate,
    "consensus-demo": cmd_consensus_demo,
    "bench": cmd_bench,
}


def build_config(args):
    """Merge the JSON config with the command-line overrides."""
    d = {}
    if args.config:
        with open(args.config) as f:
            try:
                d = json.load(f)
            except ValueError as e:
                issue("{}: {}".format(args.config, e), "error", ParseError, line=getattr(e, "lineno", None))
        if not isinstance(d, dict):
            issue("{} must hold a JSON object.".format(args.config), "error", ConfigError)
    for key in ("out", "seed", "threads"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    for key, section, name in (
        ("alpha", "diffusion", "alpha"),
        ("steps", "diffusion", "steps"),
        ("epochs", "train", "epochs"),
        ("lr", "train", "lr"),
        ("model", "cascade", "model"),
        ("runs", "cascade", "runs"),
    ):
        value = getattr(args, key, None)
        if value is not None:
            if not isinstance(d.setdefault(section, {}), dict):
                issue("{}: must be an object.".format(section), "error", ConfigError, field=section)
            d[section][name] = value
    if getattr(args, "folds", None) is not None:
        d["folds"] = args.folds
    return ExperimentConfig.from_dict(d)


def make_parser(readers):
    parser = ap.ArgumentParser(
        description="Stubborn graph diffusion: run, train, simulate and check consensus."
    )
    parser.add_argument("-v", "--version", action="version", version="opinionflow " + __version__)

    common = ap.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, metavar="PATH", help="JSON experiment configuration.")
    common.add_argument("--out", type=str, metavar="DIR", help="Directory for the output files.")
    common.add_argument("--seed", type=int, help="Random seed.")
    common.add_argument("--threads", type=int, help="Thread count (recorded in the outputs).")
    common.add_argument(
        "-r",
        "--reader",
        type=str.lower,
        choices=sorted(readers.keys()),
        default=None,
        help="Reader for the graph file (default: by file extension).",
    )
    common.add_argument(
        "-d",
        "--debug",
        nargs="?",
        type=int,
        default=0,
        metavar="LEVEL",
        help="Print debugging info. (Larger LEVEL means more info.)",
    )

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("diffuse", parents=[common], help="Run a diffusion and report convergence.")
    p.add_argument("--alpha", type=float, help="Retention coefficient.")
    p.add_argument("--steps", type=int, help="Number of diffusion steps.")

    for name, helptext in (("train-nc", "Train node classification."), ("train-ie", "Train influence estimation.")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--epochs", type=int, help="Training epochs.")
        p.add_argument("--lr", type=float, help="Learning rate.")
        if name == "train-ie":
            p.add_argument("--folds", type=int, help="Cross-validation folds.")
            p.add_argument("--model", type=str.lower, choices=["ic", "lt", "sis"], help="Cascade model.")
            p.add_argument("--runs", type=int, help="Monte Carlo runs.")

    p = sub.add_parser("simulate", parents=[common], help="Simulate a cascade and write activation probabilities.")
    p.add_argument("--model", type=str.lower, choices=["ic", "lt", "sis"], help="Cascade model.")
    p.add_argument("--runs", type=int, help="Monte Carlo runs.")

    sub.add_parser("consensus-demo", parents=[common], help="Check the four consensus scenarios on an SBM.")
    sub.add_parser("bench", parents=[common], help="Time diffusion steps on graphs of doubling size.")
    return parser


def main(argv=None):
    readers = scan_for_readers()
    args = make_parser(readers).parse_args(argv)
    set_debug_level(args.debug)

    try:
        exp = build_config(args)
        return COMMANDS[args.command](exp, args)
    except (ConfigError, ParseError) as e:
        print("Configuration error: {}".format(e), file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print("Diverged at step {}: {}".format(e.step, e), file=sys.stderr)
        return EXIT_DIVERGENCE
    except OpinionFlowError as e:
        print("Error: {}".format(e), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print("I/O error: {}".format(e), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
