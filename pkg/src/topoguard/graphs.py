"""Undirected attributed graphs and the structural operations on them.

Adjacency matrices are dense float64 arrays holding exactly 0.0 and 1.0,
symmetric with a zero diagonal. A ``Graph`` exposes its adjacency only
through a read-counting property; privacy tests use the counter to prove a
code path never touched a protected adjacency after a sanitized release.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np


class InvalidGraph(ValueError):
    """Adjacency/feature/label arrays violate a structural invariant."""


@dataclass(frozen=True)
class EdgeSet:
    """Canonical undirected edge set: pairs (i, j) with i < j, no self-loops."""

    pairs: frozenset

    @classmethod
    def from_pairs(cls, pairs) -> "EdgeSet":
        canon = set()
        for i, j in pairs:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidGraph(f"self-pair ({i}, {j}) is not an edge")
            canon.add((i, j) if i < j else (j, i))
        return cls(frozenset(canon))

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray) -> "EdgeSet":
        rows, cols = np.nonzero(np.triu(adjacency, k=1))
        return cls(frozenset((int(i), int(j)) for i, j in zip(rows, cols)))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.pairs)

    def __contains__(self, pair) -> bool:
        i, j = pair
        return ((i, j) if i < j else (j, i)) in self.pairs

    def sorted_pairs(self) -> list:
        return sorted(self.pairs)


class Graph:
    """Node-attributed undirected graph with a training mask.

    Structural invariants (checked on construction): adjacency symmetric,
    entries exactly 0/1, zero diagonal; features/labels/mask row counts agree;
    labels in [0, n_classes). The training mask may be empty here — sampled
    attack targets carry no labeled nodes — and loaders/training enforce
    non-emptiness at their own boundary.
    """

    def __init__(self, adjacency, features, labels, train_mask, n_classes=None):
        adjacency = np.ascontiguousarray(adjacency, dtype=np.float64)
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        train_mask = np.ascontiguousarray(train_mask, dtype=bool)

        n = adjacency.shape[0]
        if adjacency.ndim != 2 or adjacency.shape != (n, n):
            raise InvalidGraph(f"adjacency must be square, got {adjacency.shape}")
        if not np.array_equal(adjacency, adjacency.T):
            raise InvalidGraph("adjacency must be symmetric")
        if not np.all((adjacency == 0.0) | (adjacency == 1.0)):
            raise InvalidGraph("adjacency entries must be exactly 0 or 1")
        if np.any(np.diagonal(adjacency) != 0.0):
            raise InvalidGraph("adjacency diagonal must be zero")
        if features.ndim != 2 or features.shape[0] != n:
            raise InvalidGraph(f"features must be ({n}, f), got {features.shape}")
        if labels.shape != (n,) or train_mask.shape != (n,):
            raise InvalidGraph("labels and train_mask must have one entry per node")
        if n > 0 and labels.min() < 0:
            raise InvalidGraph("labels must be non-negative")
        inferred = int(labels.max()) + 1 if n > 0 else 1
        self.n_classes = int(n_classes) if n_classes is not None else inferred
        if n > 0 and labels.max() >= self.n_classes:
            raise InvalidGraph(f"label {labels.max()} out of range for {self.n_classes} classes")

        self.n_nodes = n
        self._adjacency = adjacency
        self.features = features
        self.labels = labels
        self.train_mask = train_mask
        self.adjacency_reads = 0

    @property
    def adjacency(self) -> np.ndarray:
        """The adjacency matrix; every access bumps ``adjacency_reads``."""
        self.adjacency_reads += 1
        return self._adjacency

    @property
    def n_edges(self) -> int:
        return int(self._adjacency.sum()) // 2

    def replace_adjacency(self, adjacency) -> "Graph":
        """Same nodes/features/labels/mask on a different edge structure."""
        return Graph(adjacency, self.features, self.labels, self.train_mask,
                     n_classes=self.n_classes)


class Subgraph(NamedTuple):
    """A sampled induced subgraph plus its mapping back to the parent.

    ``graph`` is re-indexed 0..len(nodes)-1 following ``nodes`` (sorted
    original ids); ``edges`` keeps original ids so results can be scored
    against the parent graph.
    """

    graph: Graph
    nodes: list
    edges: EdgeSet


def edge_set(g: Graph) -> EdgeSet:
    """Edges of ``g`` as canonical (i, j) pairs, i < j."""
    return EdgeSet.from_adjacency(g.adjacency)


@dataclass(frozen=True)
class NormCache:
    """Intermediates of the symmetric degree normalization.

    Kept around so gradient code can chain through the normalization:
    ``m`` is adjacency + I, ``deg`` its row sums, ``dinv_sqrt`` = deg^(-1/2),
    and ``a_norm`` = dinv_sqrt dinv_sqrt^T * m (elementwise).
    """

    m: np.ndarray
    deg: np.ndarray
    dinv_sqrt: np.ndarray
    a_norm: np.ndarray


def normalize_with_cache(adjacency: np.ndarray) -> NormCache:
    """Self-loop + symmetric degree normalization with cached intermediates."""
    a = np.asarray(adjacency, dtype=np.float64)
    m = a + np.eye(a.shape[0])
    deg = m.sum(axis=1)
    dinv_sqrt = np.power(deg, -0.5)
    a_norm = (dinv_sqrt[:, None] * m) * dinv_sqrt[None, :]
    return NormCache(m=m, deg=deg, dinv_sqrt=dinv_sqrt, a_norm=a_norm)


def normalized_adjacency(g: Graph) -> np.ndarray:
    """D^(-1/2) (A + I) D^(-1/2) with D the self-loop-augmented degrees."""
    return normalize_with_cache(g.adjacency).a_norm


def complement_mask(g: Graph) -> np.ndarray:
    """Indicator of absent edges: 1 at off-diagonal non-edges, 0 elsewhere."""
    a = g.adjacency
    mask = 1.0 - a - np.eye(g.n_nodes)
    return np.clip(mask, 0.0, 1.0)


class OverlapCounts(NamedTuple):
    tp: int
    fp: int
    fn: int


def overlap(e_t: EdgeSet, e_a: EdgeSet) -> OverlapCounts:
    """Exact agreement counts: tp in both, fp only in e_a, fn only in e_t."""
    tp = len(e_t.pairs & e_a.pairs)
    return OverlapCounts(tp=tp, fp=len(e_a) - tp, fn=len(e_t) - tp)


def bfs_sample(g: Graph, target_size: int, seed: int) -> Subgraph:
    """Breadth-first node sample and its induced subgraph.

    The root is drawn uniformly from a PRNG seeded with ``seed``; neighbors
    enter the queue in ascending id order. If a component is exhausted before
    ``target_size`` nodes are collected, the walk restarts from the lowest-id
    unvisited node. Sampling the whole graph (target_size >= n) returns every
    node.
    """
    if target_size <= 0:
        raise ValueError("target_size must be positive")
    a = g.adjacency
    n = g.n_nodes
    rng = np.random.default_rng(seed)
    root = int(rng.integers(n))

    seen = {root}
    queue = deque([root])
    visited = []
    while len(visited) < min(target_size, n):
        if not queue:
            # component exhausted: restart from the lowest unvisited id
            rest = next(i for i in range(n) if i not in seen)
            seen.add(rest)
            queue.append(rest)
        u = queue.popleft()
        visited.append(u)
        for v in np.flatnonzero(a[u]):
            v = int(v)
            if v not in seen:
                seen.add(v)
                queue.append(v)

    nodes = sorted(visited)
    idx = np.asarray(nodes, dtype=np.int64)
    sub_adj = a[np.ix_(idx, idx)]
    sub = Graph(sub_adj, g.features[idx], g.labels[idx], g.train_mask[idx],
                n_classes=g.n_classes)
    rows, cols = np.nonzero(np.triu(sub_adj, k=1))
    edges = EdgeSet.from_pairs((nodes[i], nodes[j]) for i, j in zip(rows, cols))
    return Subgraph(graph=sub, nodes=nodes, edges=edges)


def bfs_sample_excluding(g: Graph, exclude, target_size: int,
                         seed: int) -> Optional[Subgraph]:
    """BFS sample restricted to nodes outside ``exclude``, in original ids.

    Used to draw a shadow subgraph disjoint from an attack target. Returns
    None when fewer than two nodes remain. The inner sample walks the graph
    induced on the kept nodes; the returned ``nodes`` and ``edges`` are
    mapped back to the original ids, while ``graph`` stays the re-indexed
    induced graph.
    """
    keep = sorted(set(range(g.n_nodes)) - set(exclude))
    if len(keep) < 2:
        return None
    idx = np.asarray(keep, dtype=np.int64)
    adj = g.adjacency[np.ix_(idx, idx)]
    inner = Graph(adj, g.features[idx], g.labels[idx], g.train_mask[idx],
                  n_classes=g.n_classes)
    inner_sub = bfs_sample(inner, min(target_size, len(keep)), seed)
    nodes = [keep[v] for v in inner_sub.nodes]
    edges = EdgeSet.from_pairs((keep[i], keep[j]) for i, j in inner_sub.edges)
    return Subgraph(graph=inner_sub.graph, nodes=nodes, edges=edges)
