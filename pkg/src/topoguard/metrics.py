"""Leakage and utility metrics for attack/defense evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import EdgeSet, Graph, edge_set, overlap


class ZeroBaseline(ValueError):
    """Relative accuracy loss is undefined for a zero-accuracy baseline."""


@dataclass(frozen=True)
class TplReport:
    """Edge-recovery outcome of one attack against one ground truth."""

    tp: int
    fp: int
    fn: int
    jaccard: float
    precision: float
    recall: float
    f1: float


def tpl(e_t: EdgeSet, e_a: EdgeSet) -> TplReport:
    """Jaccard leakage of an attack edge set against the true edges.

    The headline number is ``jaccard`` = |intersection| / |union|; the F1
    companion uses precision/recall over the same counts. Empty-vs-empty
    degenerates to 0 everywhere.
    """
    tp, fp, fn = overlap(e_t, e_a)
    union = tp + fp + fn
    jaccard = tp / union if union else 0.0
    precision = tp / len(e_a) if len(e_a) else 0.0
    recall = tp / len(e_t) if len(e_t) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return TplReport(tp=tp, fp=fp, fn=fn, jaccard=jaccard,
                     precision=precision, recall=recall, f1=f1)


def accuracy_loss(acc_before: float, acc_after: float) -> float:
    """Relative utility cost of a defense: (before - after) / before.

    Negative values mean the defended model improved.
    """
    if acc_before == 0.0:
        raise ZeroBaseline("baseline accuracy is zero")
    return (acc_before - acc_after) / acc_before


def _top_degree_nodes(edges: EdgeSet, n_nodes: int, k: int) -> set:
    deg = np.zeros(n_nodes, dtype=np.int64)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    order = sorted(range(n_nodes), key=lambda v: (-deg[v], v))
    return set(order[:k])


def influential_node_f1(g_true: Graph, e_a: EdgeSet, k: int) -> float:
    """F1 overlap of the top-k degree nodes in the true vs attack graphs.

    Degree ties break to the lower node id on both sides.
    """
    n_nodes = g_true.n_nodes
    if not 1 <= k <= n_nodes:
        raise ValueError(f"k must lie in [1, {n_nodes}], got {k}")
    top_t = _top_degree_nodes(edge_set(g_true), n_nodes, k)
    top_a = _top_degree_nodes(e_a, n_nodes, k)
    inter = len(top_t & top_a)
    return 2.0 * inter / (len(top_t) + len(top_a))
