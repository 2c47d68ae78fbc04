import itertools
import math
import time

import numpy as np
import pytest

from dyncomm.core import Partition, SegmentGraph
from dyncomm.generator import build_static_model, sample_segment
from dyncomm.mcmc import (ClustererConfig, ClusteringError, _block_stats,
                          _description_length, _mh_sweep, cluster, objective,
                          propose_and_accept)
from dyncomm.metrics import pair_confusion, precision, recall
from conftest import two_cliques
from reference import enumerate_set_partitions


def test_empty_graph_rejected():
    g = SegmentGraph(0, 4, np.empty(0, dtype=int), np.empty(0, dtype=int),
                     np.empty(0, dtype=int))
    with pytest.raises(ClusteringError, match="nothing to cluster"):
        cluster(g, ClustererConfig())
    with pytest.raises(ClusteringError):
        objective(g, Partition(np.zeros(4, dtype=int)))


def test_two_cliques_recovered_as_components():
    g = two_cliques(10)
    p = cluster(g, ClustererConfig(sweeps=30, b_max=6, rng_seed=1))
    assert p.equivalent_to(Partition(np.array([0] * 10 + [1] * 10)))


def test_complete_graph_single_block():
    g = SegmentGraph.from_pairs(0, 8, itertools.combinations(range(8), 2))
    # oracle: exhaustive objective comparison over all partitions into <= 2 blocks
    best = min((objective(g, Partition.densify(labels)).value, labels)
               for labels in itertools.product([0, 1], repeat=8)
               if labels[0] == 0)
    assert Partition.densify(best[1]).n_blocks == 1
    p = cluster(g, ClustererConfig(sweeps=40, b_max=2, rng_seed=2))
    assert p.n_blocks == 1


def test_objective_label_permutation_invariance_exact():
    rng = np.random.default_rng(6)
    g = sample_segment(build_static_model([8, 8], 0.3), 0, 60, 4)
    for _ in range(20):
        p = Partition.densify(rng.integers(0, 4, size=16))
        perm = rng.permutation(p.n_blocks)
        q = Partition.densify(perm[p.labels])
        assert objective(g, p).value == objective(g, q).value


def test_exhaustive_argmin_on_six_nodes():
    # two triangles joined by one edge
    pairs = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]
    g = SegmentGraph.from_pairs(0, 6, pairs)
    candidates = []
    for blocks in enumerate_set_partitions(range(6)):
        if len(blocks) <= 3:
            candidates.append(Partition.from_blocks(blocks, 6))
    oracle_best = min(candidates, key=lambda p: objective(g, p).value)
    found = cluster(g, ClustererConfig(sweeps=60, b_max=3, rng_seed=3))
    assert objective(g, found).value == pytest.approx(
        objective(g, oracle_best).value)
    assert found.equivalent_to(oracle_best)


def test_merging_separated_cliques_increases_objective():
    g = two_cliques(8)
    split = Partition(np.array([0] * 8 + [1] * 8))
    merged = Partition(np.zeros(16, dtype=int))
    assert objective(g, merged).value > objective(g, split).value


def test_planted_two_block_recovery_over_seeds():
    model = build_static_model([20, 20], external_internal_ratio=0.1)
    g = sample_segment(model, 0, 400, 12)
    truth = model.base_blocks
    for seed in range(10):
        p = cluster(g, ClustererConfig(sweeps=60, b_max=8, rng_seed=seed))
        c = pair_confusion(p, truth)
        assert precision(c) >= 0.95
        assert recall(c) >= 0.95


def test_seed_determinism():
    model = build_static_model([15, 15, 15], external_internal_ratio=0.3)
    g = sample_segment(model, 0, 300, 8)
    cfg = ClustererConfig(sweeps=40, b_max=8, rng_seed=17)
    a = cluster(g, cfg)
    b = cluster(g, cfg)
    assert np.array_equal(a.labels, b.labels)
    c = cluster(g, ClustererConfig(sweeps=40, b_max=8, rng_seed=18))
    # different seeds may coincide on strong structure, but arrays must be
    # valid partitions either way
    assert c.n_blocks >= 1


def test_variability_across_seeds_on_weak_signal():
    model = build_static_model([10] * 4, external_internal_ratio=0.5)
    g = sample_segment(model, 0, 160, 5)
    seen = set()
    for seed in range(10):
        p = cluster(g, ClustererConfig(sweeps=5, b_max=8, anneal=False,
                                       greedy_passes=1, rng_seed=seed))
        seen.add(tuple(Partition.densify(p.labels).labels.tolist()))
    assert len(seen) >= 2


def test_block_count_respects_bounds():
    g = two_cliques(6)
    for b_min, b_max in ((1, 1), (2, 3), (1, 4)):
        p = cluster(g, ClustererConfig(sweeps=20, b_min=b_min, b_max=b_max,
                                       rng_seed=4))
        assert b_min <= p.n_blocks <= b_max


def test_zero_degree_nodes_assigned_deterministically():
    pairs = list(itertools.combinations(range(6), 2))
    g = SegmentGraph.from_pairs(0, 8, pairs)  # nodes 6, 7 isolated
    p1 = cluster(g, ClustererConfig(sweeps=30, b_max=3, rng_seed=1))
    p2 = cluster(g, ClustererConfig(sweeps=30, b_max=3, rng_seed=9))
    assert p1.labels[6] == p2.labels[6]
    assert p1.labels[7] == p2.labels[7]


def path3():
    return SegmentGraph.from_pairs(0, 3, [(0, 1), (1, 2)])


def test_null_proposal_returns_state():
    g = path3()
    cfg = ClustererConfig(b_max=1, rng_seed=0)  # only one block available
    state = Partition(np.array([0, 0, 0]))
    rng = np.random.default_rng(0)
    for node in range(3):
        assert propose_and_accept(state, node, g, cfg, rng) is state


def test_beta_zero_accepts_every_proposal():
    g = path3()
    cfg = ClustererConfig(beta=0.0, b_max=3, epsilon=1.0, rng_seed=0)
    rng = np.random.default_rng(42)
    state = Partition(np.array([0, 0, 0]))
    changed = 0
    for step in range(200):
        new = propose_and_accept(state, int(rng.integers(0, 3)), g, cfg, rng)
        if not np.array_equal(new.labels, state.labels):
            changed += 1
        state = new
    assert changed > 50  # random walk moves freely


def test_greedy_limit_monotone_objective():
    model = build_static_model([10, 10], external_internal_ratio=0.2)
    g = sample_segment(model, 0, 150, 3)
    cfg = ClustererConfig(beta=math.inf, b_max=5, rng_seed=0)
    rng = np.random.default_rng(7)
    state = Partition.densify(rng.integers(0, 5, size=20))
    prev = objective(g, state).value
    for step in range(300):
        state = propose_and_accept(state, int(rng.integers(0, 20)), g, cfg, rng)
        cur = objective(g, state).value
        assert cur <= prev + 1e-9
        prev = cur


@pytest.mark.slow
def test_chain_matches_boltzmann_on_path():
    # All 5 set partitions of a 3-node path; long-run visit frequencies of
    # the chain must match exp(-beta * DL) weights.
    g = path3()
    cfg = ClustererConfig(beta=1.0, b_max=3, epsilon=1.0, rng_seed=0)
    parts = [Partition.from_blocks(bl, 3)
             for bl in enumerate_set_partitions(range(3))]
    weights = np.array([math.exp(-cfg.beta * objective(g, p).value)
                        for p in parts])
    target = weights / weights.sum()

    rng = np.random.default_rng(123)
    state = parts[0]
    counts = np.zeros(len(parts))
    n_steps = 400_000
    keys = {tuple(Partition.densify(p.labels).labels.tolist()): i
            for i, p in enumerate(parts)}
    for step in range(n_steps):
        state = propose_and_accept(state, int(rng.integers(0, 3)), g, cfg, rng)
        counts[keys[tuple(Partition.densify(state.labels).labels.tolist())]] += 1
    freq = counts / n_steps
    assert np.max(np.abs(freq - target)) < 0.02


def test_sweep_incremental_dl_matches_recompute():
    from dyncomm.mcmc import _csr
    model = build_static_model([12, 12, 12], external_internal_ratio=0.4)
    g = sample_segment(model, 0, 250, 9)
    indptr, indices, w, deg = _csr(g)
    rng = np.random.default_rng(5)
    b = rng.integers(0, 5, size=36).astype(np.int64)
    m, e, n = _block_stats(g, b, 5)
    dl = float(_description_length(m, e, n, g.total_weight, 36))
    state = np.array([987654321], dtype=np.uint64)
    for _ in range(10):
        dl += _mh_sweep(indptr, indices, w, deg, b, m, e, n, g.total_weight,
                        36, 1.0, 0.1, state)
    m2, e2, n2 = _block_stats(g, b, 5)
    assert np.array_equal(m, m2)
    assert np.array_equal(e, e2)
    assert np.array_equal(n, n2)
    recomputed = float(_description_length(m2, e2, n2, g.total_weight, 36))
    assert dl == pytest.approx(recomputed, abs=1e-6)


@pytest.mark.slow
def test_sweep_time_near_linear_in_edges():
    from dyncomm.mcmc import _csr
    times = []
    sizes = [2000, 4000, 8000, 16000]
    for n_edges in sizes:
        model = build_static_model([n_edges // 32] * 4,
                                   external_internal_ratio=0.3)
        g = sample_segment(model, 0, n_edges, 1)
        n_nodes = g.node_count
        indptr, indices, w, deg = _csr(g)
        b = np.random.default_rng(0).integers(0, 8, size=n_nodes).astype(np.int64)
        m, e, n = _block_stats(g, b, 8)
        state = np.array([1], dtype=np.uint64)
        _mh_sweep(indptr, indices, w, deg, b, m, e, n, g.total_weight,
                  n_nodes, 1.0, 0.1, state)  # warm
        reps = 20
        t0 = time.perf_counter()
        for _ in range(reps):
            _mh_sweep(indptr, indices, w, deg, b, m, e, n, g.total_weight,
                      n_nodes, 1.0, 0.1, state)
        times.append((time.perf_counter() - t0) / reps)
    per_edge = [t / s for t, s in zip(times, sizes)]
    assert max(per_edge) <= 2.5 * min(per_edge)
