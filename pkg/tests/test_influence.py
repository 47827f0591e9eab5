import networkx as nx
import numpy as np
import pytest

from opinionflow.common import ConfigError
from opinionflow.graph import build_graph
from opinionflow.influence import (
    IC,
    LT,
    SIS,
    CascadeConfig,
    exact_ic_probabilities,
    probabilities_csv,
    random_seed_set,
    simulate,
)

from .random_graphs import random_graph


def test_all_seeds_always_active(rng):
    g = random_graph(12, 0.3, rng)
    for model in (IC, LT, SIS):
        cfg = CascadeConfig(model=model, runs=200, seed_set=range(12))
        assert np.all(simulate(g, cfg) == 1.0)


def test_zero_probability_keeps_seeds(rng):
    g = random_graph(10, 0.4, rng)
    probs = simulate(g, CascadeConfig(model=IC, runs=500, seed_set=[2, 5], p=0.0))
    expected = np.zeros(10)
    expected[[2, 5]] = 1.0
    assert np.array_equal(probs, expected)


def test_single_edge_ic():
    g = build_graph([(0, 1)], 2)
    probs = simulate(g, CascadeConfig(model=IC, runs=100000, seed_set=[0], p=0.5, rng_seed=3))
    assert probs[0] == 1.0
    assert probs[1] == pytest.approx(0.5, abs=0.01)


def test_lt_single_edge_and_isolated_node():
    g = build_graph([(0, 1)], 3)
    probs = simulate(g, CascadeConfig(model=LT, runs=1000, seed_set=[0]))
    assert probs.tolist() == [1.0, 1.0, 0.0]


def test_sis_limits():
    g = build_graph([(0, 1), (1, 2)], 3)
    still = simulate(g, CascadeConfig(model=SIS, runs=500, seed_set=[0], beta=0.0))
    assert still.tolist() == [1.0, 0.0, 0.0]

    one_step = simulate(g, CascadeConfig(model=SIS, runs=100000, seed_set=[0], beta=0.7, gamma=1.0, horizon=1))
    assert one_step[1] == pytest.approx(0.7, abs=0.01)
    assert one_step[2] == 0.0

    flood = simulate(g, CascadeConfig(model=SIS, runs=100, seed_set=[0], beta=1.0, gamma=0.0, horizon=5))
    assert np.all(flood == 1.0)
    final = simulate(
        g, CascadeConfig(model=SIS, runs=100, seed_set=[0], beta=0.0, gamma=1.0, horizon=1, sis_final_state=True)
    )
    assert np.all(final == 0.0)


def test_more_seeds_never_lower_ic(rng):
    for _ in range(5):
        g = random_graph(15, 0.25, rng)
        small = CascadeConfig(model=IC, runs=2000, seed_set=[0], rng_seed=11)
        large = CascadeConfig(model=IC, runs=2000, seed_set=[0, 7], rng_seed=11)
        assert np.all(simulate(g, large) >= simulate(g, small))


def test_monte_carlo_matches_exact(rng):
    for _ in range(3):
        g = random_graph(8, 0.35, rng)
        runs = 20000
        exact = exact_ic_probabilities(g, [0], p=0.3)
        estimate = simulate(g, CascadeConfig(model=IC, runs=runs, seed_set=[0], p=0.3, rng_seed=5))
        sigma = np.sqrt(exact * (1 - exact) / runs)
        assert np.all(np.abs(estimate - exact) <= 3 * sigma + 1e-3)


def test_exact_weighted_cascade_path():
    g = build_graph([(0, 1), (1, 2)], 3)
    # Weighted cascade: p(0, 1) = 1/2 and p(1, 2) = 1.
    assert np.allclose(exact_ic_probabilities(g, [0]), [1.0, 0.5, 0.5])


def test_exact_refuses_large_graphs(rng):
    with pytest.raises(ConfigError):
        exact_ic_probabilities(random_graph(13, 0.3, rng), [0])


def test_simulation_is_deterministic(rng):
    g = random_graph(20, 0.2, rng)
    for model in (IC, LT, SIS):
        cfg = CascadeConfig(model=model, runs=2500, seed_set=[1, 4], rng_seed=9)
        assert np.array_equal(simulate(g, cfg), simulate(g, cfg))
    other = CascadeConfig(model=IC, runs=2500, seed_set=[1, 4], rng_seed=10)
    assert probabilities_csv(simulate(g, other)).splitlines()[0] == "node,probability"


def test_cascade_config_validation():
    with pytest.raises(ConfigError) as e:
        CascadeConfig(model="sir", seed_set=[0])
    assert e.value.field == "model"
    with pytest.raises(ConfigError) as e:
        CascadeConfig(seed_set=[])
    assert e.value.field == "seed_set"
    with pytest.raises(ConfigError) as e:
        CascadeConfig(seed_set=[0], beta=1.5)
    assert e.value.field == "beta"
    with pytest.raises(ConfigError) as e:
        CascadeConfig.from_dict({"seed_set": [0], "delta": 0.1})
    assert e.value.field == "delta"
    with pytest.raises(ConfigError):
        simulate(build_graph([(0, 1)], 2), CascadeConfig(seed_set=[5], runs=10))


def test_random_seed_set():
    seeds = random_seed_set(50, 0.1, 3)
    assert len(seeds) == 5
    assert np.all(np.diff(seeds) > 0)
    assert len(random_seed_set(3, 0.1, 3)) == 1
    with pytest.raises(ConfigError):
        random_seed_set(10, 0.0)


def small_atlas_graphs():
    for nxg in nx.graph_atlas_g():
        if 1 <= nxg.number_of_nodes() <= 6:
            yield build_graph(list(nxg.edges()), nxg.number_of_nodes())


def test_monte_carlo_matches_enumeration_on_all_small_graphs():
    runs = 100000
    for index, g in enumerate(small_atlas_graphs()):
        p = None if index % 2 else 0.4
        exact = exact_ic_probabilities(g, [0], p=p)
        estimate = simulate(g, CascadeConfig(model=IC, runs=runs, seed_set=[0], p=p, rng_seed=index))
        sigma = np.sqrt(exact * (1 - exact) / runs)
        # Floor covers ~1200 simultaneous comparisons.
        assert np.all(np.abs(estimate - exact) <= 3 * sigma + 3e-3), index


def test_lt_path_closed_form():
    g = build_graph([(0, 1), (1, 2)], 3)
    probs = simulate(g, CascadeConfig(model=LT, runs=100000, seed_set=[0], rng_seed=2))
    # Node 1 needs threshold <= 1/2; node 2 listens only to node 1.
    assert probs[0] == 1.0
    assert probs[1] == pytest.approx(0.5, abs=0.01)
    assert probs[2] == pytest.approx(0.5, abs=0.01)


def test_sis_newly_infected_can_recover():
    g = build_graph([(0, 1)], 2)
    flash = CascadeConfig(model=SIS, runs=1000, seed_set=[0], beta=1.0, gamma=1.0, horizon=1, sis_final_state=True)
    assert simulate(g, flash).tolist() == [0.0, 0.0]
    ever = CascadeConfig(model=SIS, runs=1000, seed_set=[0], beta=1.0, gamma=1.0, horizon=1)
    assert simulate(g, ever).tolist() == [1.0, 1.0]

    half = CascadeConfig(model=SIS, runs=100000, seed_set=[0], beta=1.0, gamma=0.5, horizon=1, sis_final_state=True)
    probs = simulate(g, half)
    assert probs[0] == pytest.approx(0.5, abs=0.01)
    assert probs[1] == pytest.approx(0.5, abs=0.01)


def test_cascade_config_types():
    with pytest.raises(ConfigError) as e:
        CascadeConfig.from_dict({"seed_set": [0], "runs": "many"})
    assert e.value.field == "runs"
    with pytest.raises(ConfigError) as e:
        CascadeConfig.from_dict({"seed_set": ["a"]})
    assert e.value.field == "seed_set"
    assert CascadeConfig.from_dict({"seed_set": [2.0, 1], "runs": 10.0}).runs == 10
