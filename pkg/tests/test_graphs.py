"""Graph container invariants, edge sets, normalization, BFS sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoguard import (EdgeSet, Graph, InvalidGraph, OverlapCounts,
                       bfs_sample, bfs_sample_excluding, complement_mask,
                       edge_set, normalized_adjacency, overlap)

from conftest import edgeless_graph, path_graph, random_graph


def _graph(a, n_classes=2):
    n = a.shape[0]
    return Graph(a, np.zeros((n, 2)), np.zeros(n, dtype=int),
                 np.zeros(n, dtype=bool), n_classes=n_classes)


# --------------------------------------------------------------------------
# Graph construction invariants


def test_graph_rejects_asymmetric_adjacency():
    a = np.zeros((3, 3))
    a[0, 1] = 1.0
    with pytest.raises(InvalidGraph, match="symmetric"):
        _graph(a)


def test_graph_rejects_non_binary_entries():
    a = np.zeros((2, 2))
    a[0, 1] = a[1, 0] = 0.5
    with pytest.raises(InvalidGraph, match="0 or 1"):
        _graph(a)


def test_graph_rejects_self_loops():
    a = np.eye(3)
    with pytest.raises(InvalidGraph, match="diagonal"):
        _graph(a)


def test_graph_rejects_non_square():
    with pytest.raises(InvalidGraph):
        _graph(np.zeros((2, 3)))


def test_graph_rejects_feature_row_mismatch():
    with pytest.raises(InvalidGraph):
        Graph(np.zeros((3, 3)), np.zeros((2, 2)), np.zeros(3, dtype=int),
              np.zeros(3, dtype=bool))


def test_graph_rejects_out_of_range_label():
    with pytest.raises(InvalidGraph, match="out of range"):
        Graph(np.zeros((2, 2)), np.zeros((2, 1)), np.array([0, 5]),
              np.zeros(2, dtype=bool), n_classes=2)


def test_graph_rejects_negative_label():
    with pytest.raises(InvalidGraph, match="non-negative"):
        Graph(np.zeros((2, 2)), np.zeros((2, 1)), np.array([0, -1]),
              np.zeros(2, dtype=bool))


def test_adjacency_reads_counter():
    g = path_graph(4)
    before = g.adjacency_reads
    g.adjacency
    g.adjacency
    assert g.adjacency_reads == before + 2


def test_replace_adjacency_keeps_attributes():
    g = path_graph(4)
    g2 = g.replace_adjacency(np.zeros((4, 4)))
    assert g2.n_edges == 0
    np.testing.assert_array_equal(g2.features, g.features)
    np.testing.assert_array_equal(g2.labels, g.labels)
    assert g2.n_classes == g.n_classes


# --------------------------------------------------------------------------
# EdgeSet


def test_edge_set_canonicalizes_order():
    es = EdgeSet.from_pairs([(2, 1), (1, 2), (0, 3)])
    assert es.pairs == frozenset({(1, 2), (0, 3)})
    assert (2, 1) in es and (1, 2) in es
    assert len(es) == 2


def test_edge_set_rejects_self_pair():
    with pytest.raises(InvalidGraph):
        EdgeSet.from_pairs([(1, 1)])


def test_edge_set_from_adjacency():
    g = path_graph(4)
    assert edge_set(g).pairs == frozenset({(0, 1), (1, 2), (2, 3)})


def test_edge_set_sorted_pairs():
    es = EdgeSet.from_pairs([(3, 1), (0, 2), (0, 1)])
    assert es.sorted_pairs() == [(0, 1), (0, 2), (1, 3)]


# --------------------------------------------------------------------------
# normalization and complement


def test_normalized_adjacency_isolated_node():
    g = edgeless_graph(1)
    np.testing.assert_array_equal(normalized_adjacency(g), [[1.0]])


def test_normalized_adjacency_single_edge():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(normalized_adjacency(_graph(a)),
                               np.full((2, 2), 0.5), atol=1e-15)


def test_normalized_adjacency_is_bitwise_symmetric():
    g = random_graph(12, p=0.4, seed=3)
    an = normalized_adjacency(g)
    np.testing.assert_array_equal(an, an.T)


def test_normalized_adjacency_spectrum_bounded():
    g = random_graph(10, p=0.5, seed=1)
    an = normalized_adjacency(g)
    assert np.all(an >= 0.0)
    eig = np.linalg.eigvalsh(an)
    assert eig.max() <= 1.0 + 1e-12
    assert eig.min() >= -1.0 - 1e-12


def test_complement_mask_cases():
    g = path_graph(3)  # edges (0,1), (1,2)
    want = np.zeros((3, 3))
    want[0, 2] = want[2, 0] = 1.0
    np.testing.assert_array_equal(complement_mask(g), want)

    full = _graph(1.0 - np.eye(3))
    np.testing.assert_array_equal(complement_mask(full), np.zeros((3, 3)))

    empty = edgeless_graph(3)
    np.testing.assert_array_equal(complement_mask(empty),
                                  1.0 - np.eye(3))


# --------------------------------------------------------------------------
# overlap counting


def test_overlap_worked_example():
    e_t = EdgeSet.from_pairs([(1, 2), (2, 3), (3, 4)])
    e_a = EdgeSet.from_pairs([(1, 2), (3, 4), (1, 4)])
    assert overlap(e_t, e_a) == OverlapCounts(tp=2, fp=1, fn=1)


def test_overlap_disjoint_and_identical():
    e1 = EdgeSet.from_pairs([(0, 1), (1, 2)])
    e2 = EdgeSet.from_pairs([(2, 3)])
    assert overlap(e1, e2) == OverlapCounts(tp=0, fp=1, fn=2)
    assert overlap(e1, e1) == OverlapCounts(tp=2, fp=0, fn=0)


@settings(max_examples=30, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 8), st.integers(0, 8)).map(sorted)
               .map(tuple).filter(lambda p: p[0] != p[1]), max_size=15),
       st.sets(st.tuples(st.integers(0, 8), st.integers(0, 8)).map(sorted)
               .map(tuple).filter(lambda p: p[0] != p[1]), max_size=15))
def test_overlap_counts_are_consistent(pairs_t, pairs_a):
    e_t, e_a = EdgeSet.from_pairs(pairs_t), EdgeSet.from_pairs(pairs_a)
    c = overlap(e_t, e_a)
    assert c.tp + c.fn == len(e_t)
    assert c.tp + c.fp == len(e_a)
    assert min(c.tp, c.fp, c.fn) >= 0


# --------------------------------------------------------------------------
# BFS sampling


def _seed_with_root(n, root):
    for seed in range(1000):
        if int(np.random.default_rng(seed).integers(n)) == root:
            return seed
    raise AssertionError("no seed found")


def test_bfs_sample_from_path_midpoint():
    g = path_graph(5)
    seed = _seed_with_root(5, 2)
    sub = bfs_sample(g, 3, seed)
    assert sub.nodes == [1, 2, 3]
    assert sub.edges.pairs == frozenset({(1, 2), (2, 3)})
    assert sub.graph.n_nodes == 3


def test_bfs_sample_whole_graph():
    g = random_graph(8, seed=2)
    sub = bfs_sample(g, 100, seed=0)
    assert sub.nodes == list(range(8))
    assert sub.edges.pairs == edge_set(g).pairs


def test_bfs_sample_single_node():
    g = path_graph(5)
    seed = _seed_with_root(5, 2)
    sub = bfs_sample(g, 1, seed)
    assert sub.nodes == [2]
    assert len(sub.edges) == 0


def test_bfs_sample_deterministic():
    g = random_graph(20, p=0.15, seed=5)
    s1 = bfs_sample(g, 8, seed=42)
    s2 = bfs_sample(g, 8, seed=42)
    assert s1.nodes == s2.nodes
    assert s1.edges.pairs == s2.edges.pairs


def test_bfs_sample_induced_edges_match_parent():
    g = random_graph(15, p=0.3, seed=9)
    sub = bfs_sample(g, 7, seed=1)
    a = g._adjacency
    for i, j in sub.edges:
        assert a[i, j] == 1.0
    # every parent edge between sampled nodes is present
    for u in sub.nodes:
        for v in sub.nodes:
            if u < v and a[u, v] == 1.0:
                assert (u, v) in sub.edges


def test_bfs_sample_restarts_across_components():
    a = np.zeros((4, 4))
    a[0, 1] = a[1, 0] = 1.0
    a[2, 3] = a[3, 2] = 1.0
    g = _graph(a)
    seed = _seed_with_root(4, 0)
    sub = bfs_sample(g, 3, seed)
    assert sub.nodes == [0, 1, 2]
    assert sub.edges.pairs == frozenset({(0, 1)})


def test_bfs_sample_rejects_non_positive_size():
    with pytest.raises(ValueError):
        bfs_sample(path_graph(3), 0, seed=0)


def test_bfs_sample_excluding_is_disjoint():
    g = random_graph(20, p=0.2, seed=11)
    exclude = {0, 1, 2, 3, 4}
    sub = bfs_sample_excluding(g, exclude, 8, seed=3)
    assert sub is not None
    assert not (set(sub.nodes) & exclude)
    a = g._adjacency
    for i, j in sub.edges:
        assert a[i, j] == 1.0
    assert sub.graph.n_nodes == len(sub.nodes)


def test_bfs_sample_excluding_returns_none_when_too_few_remain():
    g = path_graph(4)
    assert bfs_sample_excluding(g, {0, 1, 2}, 2, seed=0) is None
