"""Greedy synthetic-graph reconstruction against topology inference.

Starting from an edgeless graph, edges are inserted one at a time. Each
iteration first takes one or more plain gradient-descent steps on the model
weights (training loss on the labeled nodes), then scores every admissible
node pair by the gradient of the generation loss — cross-entropy against the
original model's predicted labels on the unlabeled nodes — with respect to
the adjacency, differentiated through the degree normalization AND through
the descent steps just taken. The most negative admissible score wins.

The complement mask keeps reconstructed edges off the protected edge set; a
``mu`` budget optionally re-admits up to ``floor(mu * k_hat)`` protected
edges, and ``nag_mode`` drops the masking entirely for the
no-access-guarantee ablation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .gnn import (GcnModel, TrainConfig, forward_cache, gcn_backward,
                  grad_of_weight_grad, predict_labels, train)
from .graphs import Graph, complement_mask, normalize_with_cache
from .numerics import cross_entropy

logger = logging.getLogger(__name__)


class NonFinite(FloatingPointError):
    """A loss or gradient stopped being finite during reconstruction."""


class NoCandidate(ValueError):
    """No admissible node pair is left to insert."""


@dataclass(frozen=True)
class PgrConfig:
    """Knobs of the reconstruction loop.

    ``inner_steps`` fixes the number of descent steps per insertion; the
    convergence-mode entry point replaces it with a plateau rule
    (loss change <= ``inner_tol`` over ``inner_patience`` consecutive steps,
    hard cap ``inner_cap``). ``freeze_normalization`` stops gradients at the
    degree normalization (cheaper, ablation only).
    """

    k_hat: int
    mu: float = 0.0
    eta: float = 0.01
    inner_steps: int = 1
    pretrain_epochs: int = 100
    seed: int = 0
    freeze_normalization: bool = False
    nag_mode: bool = False
    inner_tol: float = 0.01
    inner_patience: int = 5
    inner_cap: int = 500


@dataclass
class PgrOutput:
    graph: Graph
    model: GcnModel
    insertion_log: list  # (iteration, i, j, score)
    overlap_used: int


def _descend(weights, norm, x, labels, train_idx, eta, n_steps):
    """``n_steps`` plain GD steps on the training loss; returns every theta."""
    thetas = [weights]
    for _ in range(n_steps):
        cache = forward_cache(thetas[-1], norm, x)
        loss = cross_entropy(cache.p, labels, train_idx)
        if not math.isfinite(loss):
            raise NonFinite(f"training loss became {loss}")
        gw, _ = gcn_backward(cache, thetas[-1], labels, train_idx)
        thetas.append([w - eta * g for w, g in zip(thetas[-1], gw)])
    return thetas


def _descend_until_plateau(weights, norm, x, labels, train_idx, eta,
                           tol, patience, cap):
    """GD steps until the loss change stays within ``tol`` for ``patience``
    consecutive steps (or ``cap`` steps, with a warning)."""
    thetas = [weights]
    losses = []
    deltas = []
    while True:
        cache = forward_cache(thetas[-1], norm, x)
        loss = cross_entropy(cache.p, labels, train_idx)
        if not math.isfinite(loss):
            raise NonFinite(f"training loss became {loss}")
        if losses:
            deltas.append(abs(loss - losses[-1]))
        losses.append(loss)
        steps_taken = len(thetas) - 1
        if steps_taken >= patience and all(d <= tol for d in deltas[-patience:]):
            return thetas
        if steps_taken >= cap:
            logger.warning("inner loop hit the %d-step cap without converging", cap)
            return thetas
        gw, _ = gcn_backward(cache, thetas[-1], labels, train_idx)
        thetas.append([w - eta * g for w, g in zip(thetas[-1], gw)])


def _meta_from_thetas(thetas, norm, x, labels, train_idx, y_p, gen_idx, eta,
                      freeze_normalization):
    """Total adjacency gradient of the generation loss through the descent.

    Reverse accumulation over theta_0 .. theta_s: the direct adjacency term
    at theta_s, then for i = s-1 .. 0 the mixed second-order term of step i
    (gradient of <d train-loss/d W at theta_i, v> w.r.t. the adjacency) with
    the weight cotangent v updated by the matching Hessian-vector product.
    Returns the raw, unsymmetrized gradient.
    """
    cache_s = forward_cache(thetas[-1], norm, x)
    v, acc = gcn_backward(cache_s, thetas[-1], y_p, gen_idx,
                          need_adjacency=True,
                          freeze_normalization=freeze_normalization)
    for i in range(len(thetas) - 2, -1, -1):
        cache_i = forward_cache(thetas[i], norm, x)
        b_adj, b_w = grad_of_weight_grad(cache_i, thetas[i], labels, train_idx,
                                         v, freeze_normalization=freeze_normalization)
        acc = acc - eta * b_adj
        v = [vk - eta * bk for vk, bk in zip(v, b_w)]
    if not np.all(np.isfinite(acc)):
        raise NonFinite("adjacency gradient contains non-finite entries")
    return acc


def meta_gradient(model: GcnModel, g_hat: Graph, y_p: np.ndarray,
                  eta: float = 0.01, inner_steps: int = 1,
                  freeze_normalization: bool = False):
    """Descent steps plus the adjacency gradient that saw them happen.

    Runs ``inner_steps`` plain GD steps on the training loss of ``g_hat``'s
    labeled nodes, then differentiates the generation loss (targets ``y_p``
    on the unlabeled nodes, evaluated at the stepped weights) with respect to
    the adjacency through the whole unrolled chain. Returns the symmetrized
    gradient matrix and the stepped model.
    """
    if inner_steps < 1:
        raise ValueError("inner_steps must be >= 1")
    x, labels = g_hat.features, g_hat.labels
    train_idx = np.flatnonzero(g_hat.train_mask)
    gen_idx = np.flatnonzero(~g_hat.train_mask)
    norm = normalize_with_cache(g_hat.adjacency)
    y_p = np.asarray(y_p, dtype=np.int64)
    thetas = _descend(model.weights, norm, x, labels, train_idx, eta, inner_steps)
    raw = _meta_from_thetas(thetas, norm, x, labels, train_idx, y_p, gen_idx,
                            eta, freeze_normalization)
    return 0.5 * (raw + raw.T), GcnModel(weights=thetas[-1])


def select_edge(mg: np.ndarray, comp_mask: np.ndarray, current,
                overlap_remaining: int = 0):
    """Most negative admissible upper-triangle entry of the score matrix.

    Admissible pairs exclude the diagonal and anything in ``current``;
    protected edges (complement mask 0) are admissible only while
    ``overlap_remaining`` is positive. Ties break to the smallest (i, j).
    Returns ``(i, j, score)``.
    """
    n = mg.shape[0]
    allowed = np.triu(np.ones((n, n), dtype=bool), k=1)
    for i, j in current:
        a, b = (i, j) if i < j else (j, i)
        allowed[a, b] = False
    if overlap_remaining <= 0:
        allowed &= comp_mask > 0.0
    if not allowed.any():
        raise NoCandidate("every node pair is either taken or masked")
    scores = np.where(allowed, mg, np.inf)
    flat = int(np.argmin(scores))  # row-major first-minimum = ascending (i, j)
    i, j = divmod(flat, n)
    return i, j, float(mg[i, j])


def _run(g: Graph, f: GcnModel, cfg: PgrConfig, convergence: bool) -> PgrOutput:
    if cfg.k_hat < 0:
        raise ValueError("k_hat must be non-negative")
    if not 0.0 <= cfg.mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")

    x, labels, mask = g.features, g.labels, g.train_mask
    n = g.n_nodes
    train_idx = np.flatnonzero(mask)
    gen_idx = np.flatnonzero(~mask)
    y_p = predict_labels(f, g)

    if cfg.nag_mode:
        comp = 1.0 - np.eye(n)
    else:
        comp = complement_mask(g)

    # pretraining on the edgeless graph, same architecture as the target
    hidden = tuple(w.shape[1] for w in f.weights[:-1])
    g0 = Graph(np.zeros((n, n)), x, labels, mask, n_classes=g.n_classes)
    theta = train(g0, TrainConfig(layers=f.n_layers, hidden=hidden,
                                  epochs=cfg.pretrain_epochs, seed=cfg.seed)).weights

    adj_hat = np.zeros((n, n))
    budget = math.floor(cfg.mu * cfg.k_hat)
    used = 0
    current = set()
    log = []
    for it in range(cfg.k_hat):
        norm = normalize_with_cache(adj_hat)
        if convergence:
            thetas = _descend_until_plateau(theta, norm, x, labels, train_idx,
                                            cfg.eta, cfg.inner_tol,
                                            cfg.inner_patience, cfg.inner_cap)
        else:
            thetas = _descend(theta, norm, x, labels, train_idx, cfg.eta,
                              cfg.inner_steps)
        raw = _meta_from_thetas(thetas, norm, x, labels, train_idx, y_p,
                                gen_idx, cfg.eta, cfg.freeze_normalization)
        mg = 0.5 * (raw + raw.T)
        i, j, score = select_edge(mg, comp, current, budget - used)
        if comp[i, j] == 0.0:
            used += 1
        adj_hat[i, j] = adj_hat[j, i] = 1.0
        current.add((i, j))
        log.append((it, i, j, score))
        theta = thetas[-1]

    out_graph = Graph(adj_hat.copy(), x, labels, mask, n_classes=g.n_classes)
    return PgrOutput(graph=out_graph, model=GcnModel(weights=theta),
                     insertion_log=log, overlap_used=used)


def pgr_run(g: Graph, f: GcnModel, cfg: PgrConfig) -> PgrOutput:
    """Reconstruct ``cfg.k_hat`` edges with a fixed inner-step count."""
    return _run(g, f, cfg, convergence=False)


def pgr_convergence_mode(g: Graph, f: GcnModel, cfg: PgrConfig) -> PgrOutput:
    """Like ``pgr_run`` but each iteration descends until the loss plateaus."""
    return _run(g, f, cfg, convergence=True)
