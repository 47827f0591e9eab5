import numpy as np
import scipy.sparse as sp

from opinionflow.consensus import (
    INDIVIDUALIZED,
    MULTI,
    NOT_CONVERGED,
    SINGLE,
    UnionFind,
    classify_convergence,
    detect_blocks,
    verify_theorem_conditions,
)
from opinionflow.diffusion import (
    DiffusionParams,
    WeightSchedule,
    combined_matrix,
    fixed_point_solve,
    op_norm_bound,
    run_diffusion,
)
from opinionflow.graph import build_graph, normalized_laplacian, uniform_row_stochastic

from .random_graphs import contractive_params, random_graph, random_row_stochastic


def checks_by_name(checks):
    return {c.name: c for c in checks}


def test_union_find():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    uf.union(1, 0)
    assert uf.n_clusters == 3
    roots = uf.roots()
    assert roots[0] == roots[1]
    assert roots[3] == roots[4]
    assert roots[2] not in (roots[0], roots[3])


def test_classify_kinds():
    same = np.ones((4, 2))
    assert classify_convergence(same).kind == SINGLE

    two = np.array([[0.0], [0.0], [1.0], [1.0 + 1e-7]])
    report = classify_convergence(two)
    assert report.kind == MULTI
    assert report.k == 2
    assert report.clusters == [[0, 1], [2, 3]]

    apart = np.arange(5, dtype=float).reshape(-1, 1)
    assert classify_convergence(apart).kind == INDIVIDUALIZED
    assert classify_convergence(apart, converged=False).kind == NOT_CONVERGED


def test_classify_chains_transitively():
    chain = np.array([[0.0], [0.6e-5], [1.2e-5], [1.8e-5]])
    assert classify_convergence(chain, tol=1e-5).kind == SINGLE


def test_classify_permutation_equivariant(rng):
    x = np.repeat(rng.standard_normal((3, 2)), 4, axis=0)
    perm = rng.permutation(len(x))
    base = classify_convergence(x)
    permuted = classify_convergence(x[perm])
    assert np.array_equal(permuted.assignments, base.assignments[perm])
    assert np.allclose(permuted.values, base.values)


def test_detect_blocks():
    m = sp.csr_matrix(np.array([
        [0.5, 0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
    ]))
    blocks = detect_blocks(m)
    assert [b.tolist() for b in blocks] == [[0, 1], [2, 3]]


def two_triangles():
    return build_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 6)


def test_single_consensus_conditions():
    g = build_graph([(0, 1), (1, 2), (2, 3)], 4)
    params = DiffusionParams.uniform(4, alpha=0.0, lam=0.0, mu=0.0, steps=1)
    schedule = WeightSchedule.static(uniform_row_stochastic(g, 0.5))
    checks = checks_by_name(verify_theorem_conditions(params, schedule, normalized_laplacian(g), np.arange(4.0)))
    assert checks["single-consensus"].satisfied
    assert checks["single-consensus"].expected_kind == SINGLE
    assert not checks["contraction"].satisfied

    lazy_free = WeightSchedule.static(uniform_row_stochastic(g, 0.0))
    checks = checks_by_name(verify_theorem_conditions(params, lazy_free, normalized_laplacian(g), np.arange(4.0)))
    assert not checks["single-consensus"].satisfied


def test_multi_consensus_conditions():
    g = two_triangles()
    params = DiffusionParams.uniform(6, alpha=0.0, lam=0.0, mu=0.0, steps=1)
    schedule = WeightSchedule.static(uniform_row_stochastic(g, 0.5))
    lg = normalized_laplacian(g)

    x0 = np.array([1.0, 2.0, 3.0, 7.0, 8.0, 9.0])
    multi = checks_by_name(verify_theorem_conditions(params, schedule, lg, x0))["multi-consensus"]
    assert multi.satisfied
    assert multi.expected_k == 2

    same = np.array([1.0, 2.0, 3.0, 1.0, 2.0, 3.0])
    multi = checks_by_name(verify_theorem_conditions(params, schedule, lg, same))["multi-consensus"]
    assert not multi.satisfied
    assert multi.reasons


def test_individualized_conditions(rng):
    g = two_triangles()
    schedule = WeightSchedule.static(uniform_row_stochastic(g, 0.5))
    lg = normalized_laplacian(g)
    x0 = rng.standard_normal((6, 2))
    strong = DiffusionParams.uniform(6, alpha=0.3, lam=0.99, mu=0.1, steps=1)
    checks = checks_by_name(verify_theorem_conditions(strong, schedule, lg, x0))
    assert checks["individualized-consensus"].satisfied
    assert checks["contraction"].satisfied

    weak = DiffusionParams.uniform(6, alpha=0.3, lam=0.5, mu=0.1, steps=1)
    indiv = checks_by_name(verify_theorem_conditions(weak, schedule, lg, x0))["individualized-consensus"]
    assert not indiv.satisfied
    assert "min lambda" in indiv.reasons[0]


def test_lazy_walks_reach_single_consensus():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 51))
        g = random_graph(n, 0.2, rng)
        params = DiffusionParams.uniform(n, alpha=0.0, lam=0.0, mu=0.0, steps=2000)
        schedule = WeightSchedule.static(uniform_row_stochastic(g, 0.5))
        lg = normalized_laplacian(g)
        x0 = rng.standard_normal((n, 1))
        checks = checks_by_name(verify_theorem_conditions(params, schedule, lg, x0))
        assert checks["single-consensus"].satisfied
        traj, report = run_diffusion(x0, g, params, schedule, lg=lg)
        assert classify_convergence(traj.final, tol=1e-5).kind == SINGLE, seed


def disjoint_union(first, second):
    edges = [tuple(e) for e in first.edges] + [(u + first.n, v + first.n) for u, v in second.edges]
    return build_graph(edges, first.n + second.n)


def test_fixed_point_decomposes_over_blocks(rng):
    for _ in range(10):
        g = disjoint_union(random_graph(int(rng.integers(2, 10)), 0.4, rng), random_graph(int(rng.integers(2, 10)), 0.4, rng))
        w = uniform_row_stochastic(g, 0.3)
        lg = normalized_laplacian(g)
        params = contractive_params(g, w, lg, rng, steps=1)
        m_star = combined_matrix(w, lg, params)
        x0 = rng.standard_normal((g.n, 2))
        whole = fixed_point_solve(x0, m_star, params.eff_lam)

        blocks = detect_blocks(m_star + sp.identity(g.n))
        assert len(blocks) == 2
        for block in blocks:
            sub = m_star[block][:, block]
            alone = fixed_point_solve(x0[block], sub, params.eff_lam[block])
            assert np.allclose(whole[block], alone, atol=1e-12)


def test_fixed_point_stays_near_anchor(rng):
    for _ in range(30):
        g = random_graph(int(rng.integers(2, 30)), 0.3, rng)
        w = random_row_stochastic(g, rng)
        lg = normalized_laplacian(g)
        params = contractive_params(g, w, lg, rng, steps=1)
        m_star = combined_matrix(w, lg, params)
        b = op_norm_bound(m_star)
        x0 = rng.standard_normal((g.n, 3))
        anchor = params.eff_lam[:, None] * x0
        x_star = fixed_point_solve(x0, m_star, params.eff_lam)
        assert np.linalg.norm(x_star - anchor) <= b / (1.0 - b) * np.linalg.norm(anchor) + 1e-12
