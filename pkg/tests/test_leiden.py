import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphclust.graph import GraphError, Partition, build_graph, connected_components
from graphclust.leiden import QualityObjective, aggregate, leiden, local_move, quality, refine

import oracles
from conftest import random_graph

CPM1 = QualityObjective("cpm", 1.0)
MOD = QualityObjective("modularity")


def _ring_of_cliques(count=4, size=5):
    edges = [(c * size + i, c * size + j) for c in range(count) for i in range(size) for j in range(i + 1, size)]
    edges += [(c * size, ((c + 1) % count) * size + 1) for c in range(count)]
    return build_graph(edges, count * size), np.repeat(np.arange(count), size)


def _communities_connected(g, labels) -> bool:
    for c in np.unique(labels):
        nodes = np.flatnonzero(labels == c)
        if connected_components(g.subgraph(nodes)[0]).num_clusters != 1:
            return False
    return True


# ------------------------------------------------------------------ quality

def test_cpm_singletons_zero(triangle):
    assert quality(triangle, Partition([0, 1, 2]), CPM1) == 0.0


def test_cpm_triangle_examples(triangle):
    assert quality(triangle, Partition([0, 0, 0]), CPM1) == pytest.approx(0.0)
    assert quality(triangle, Partition([0, 0, 0]), QualityObjective("cpm", 0.5)) == pytest.approx(1.5)


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.floats(0.05, 2.0))
def test_quality_matches_pair_oracles(seed, gamma):
    g = random_graph(10, 0.35, seed)
    labels = np.random.default_rng(seed).integers(3, size=10)
    p = Partition.from_labels(labels)
    assert quality(g, p, QualityObjective("cpm", gamma)) == pytest.approx(oracles.cpm_pairs(g, labels, gamma), abs=1e-9)
    if g.num_edges:
        assert quality(g, p, MOD) == pytest.approx(oracles.modularity_pairs(g, labels), abs=1e-9)


def test_modularity_needs_edges():
    with pytest.raises(GraphError):
        quality(build_graph([], 3), Partition([0, 1, 2]), MOD)
    with pytest.raises(GraphError):
        leiden(build_graph([], 3))


def test_objective_validation():
    with pytest.raises(ValueError):
        QualityObjective("surprise")
    with pytest.raises(ValueError):
        QualityObjective("cpm", 0.0)


# ------------------------------------------------------------------- leiden

@pytest.mark.parametrize("seed", range(5))
def test_ring_of_cliques_cpm(seed):
    g, truth = _ring_of_cliques()
    res = leiden(g, QualityObjective("cpm", 0.5), seed=seed)
    assert res.partition.same_as(Partition(truth))


@pytest.mark.parametrize("seed", range(5))
def test_ring_of_cliques_modularity(seed):
    g, truth = _ring_of_cliques()
    assert leiden(g, MOD, seed=seed).partition.same_as(Partition(truth))


def test_two_triangles(bridged_triangles):
    res = leiden(bridged_triangles, MOD)
    assert res.partition.same_as(Partition([0, 0, 0, 1, 1, 1]))
    assert res.quality == pytest.approx(oracles.modularity_pairs(bridged_triangles, res.partition.assignment))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(["cpm", "modularity"]))
def test_communities_connected_and_quality_monotone(seed, kind):
    g = random_graph(25, 0.12, seed)
    if g.num_edges == 0:
        return
    obj = QualityObjective(kind, 0.3 if kind == "cpm" else 1.0)
    res = leiden(g, obj, seed=seed, check=True)
    assert _communities_connected(g, res.partition.assignment)
    assert all(b >= a - 1e-9 for a, b in zip(res.quality_trace, res.quality_trace[1:]))
    assert res.quality >= res.quality_trace[-1] - 1e-9


def test_deterministic_for_seed():
    g = random_graph(60, 0.08, seed=4)
    a, b = leiden(g, seed=9), leiden(g, seed=9)
    assert np.array_equal(a.partition.assignment, b.partition.assignment)


def test_beats_singletons_and_single_community():
    g, _ = _ring_of_cliques(6, 6)
    res = leiden(g)
    assert res.quality > quality(g, Partition(np.zeros(36, dtype=int)), MOD)
    assert res.quality > quality(g, Partition(np.arange(36)), MOD)


# ----------------------------------------------------------- building blocks

def test_local_move_reaches_local_optimum(bridged_triangles):
    p = local_move(bridged_triangles, Partition(np.arange(6)), MOD)
    q = quality(bridged_triangles, p, MOD)
    labels = p.assignment
    for v in range(6):
        for c in set(labels.tolist()) | {labels.max() + 1}:
            alt = labels.copy()
            alt[v] = c
            assert quality(bridged_triangles, Partition.from_labels(alt), MOD) <= q + 1e-12


def test_refine_stays_inside_communities(bridged_triangles):
    p = Partition([0, 0, 0, 0, 0, 0])
    ref = refine(bridged_triangles, p, MOD, theta=0.0)
    assert ref.num_clusters >= 1
    r = refine(bridged_triangles, Partition([0, 0, 0, 1, 1, 1]), MOD)
    for c in range(r.num_clusters):
        members = np.flatnonzero(r.assignment == c)
        assert len(set((members >= 3).tolist())) == 1


def test_aggregate_preserves_quality(bridged_triangles):
    p = Partition([0, 0, 0, 1, 1, 1])
    ref = Partition([0, 0, 1, 2, 2, 3])
    agg, init = aggregate(bridged_triangles, ref, p)
    assert agg.graph.num_nodes == 4
    assert agg.node_sizes.tolist() == [2, 1, 2, 1]
    assert agg.total_weight == pytest.approx(bridged_triangles.total_weight)
    assert quality(agg, init, MOD) == pytest.approx(quality(bridged_triangles, p, MOD))
    assert quality(agg, init, CPM1) == pytest.approx(quality(bridged_triangles, p, CPM1))
    assert np.array_equal(init.assignment[agg.carry], p.assignment)


def test_aggregate_rejects_straddling_refinement(bridged_triangles):
    with pytest.raises(GraphError, match="straddles"):
        aggregate(bridged_triangles, Partition([0, 0, 0, 0, 1, 1]), Partition([0, 0, 0, 1, 1, 1]))


def test_weighted_edges_are_used():
    g = build_graph([(0, 1, 5.0), (1, 2, 0.1), (2, 3, 5.0)], 4)
    assert leiden(g).partition.same_as(Partition([0, 0, 1, 1]))
