"""Dense graph convolutional networks with hand-derived gradients.

The forward pass is the usual normalized-propagation stack

    H_0 = X,   Z_l = A_norm H_l W_l,   H_{l+1} = relu(Z_l),   P = softmax(Z_last)

with A_norm = D^(-1/2) (A + I) D^(-1/2). Three derivative paths are
implemented by hand and each is validated against the central-difference
oracle in ``numerics.finite_diff``:

* d loss / d W_l            (training),
* d loss / d A              (through the degree normalization),
* d <d loss/d W, V> / d A   and  / d W   ("gradient of a gradient", the
  piece that lets a caller differentiate an objective through one or more
  unrolled gradient-descent steps on the weights).

Query access to a trained model goes through ``BlackBox``: posteriors on the
fixed training topology, optionally with overridden node features, and a
monotone query counter.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graphs import Graph, NormCache, normalize_with_cache, normalized_adjacency
from .numerics import (AdamState, EmptyNodeSet, ShapeMismatch, adam_step,
                       cross_entropy, softmax_rows)

# hidden widths by depth; the output layer is always the class count
_HIDDEN_BY_DEPTH = {1: (), 2: (32,), 3: (64, 32)}


@dataclass
class GcnModel:
    """A trained GCN: one weight matrix per layer, no biases."""

    weights: list

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def layer_dims(self) -> list:
        dims = [w.shape[0] for w in self.weights]
        dims.append(self.weights[-1].shape[1])
        return dims


@dataclass(frozen=True)
class TrainConfig:
    layers: int = 2
    hidden: Optional[Sequence[int]] = None  # overrides the per-depth default
    epochs: int = 100
    lr: float = 0.01
    weight_decay: float = 5e-4
    seed: int = 0


def hidden_dims(layers: int) -> tuple:
    if layers not in _HIDDEN_BY_DEPTH:
        raise ValueError(f"supported depths are 1, 2, 3; got {layers}")
    return _HIDDEN_BY_DEPTH[layers]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class ForwardCache:
    """Every intermediate of one forward pass, kept for the backward sweeps."""

    norm: NormCache
    h: list       # H_0..H_{L-1}
    s: list       # S_l = A_norm H_l
    z: list       # Z_l = S_l W_l
    r: list       # relu masks of Z_0..Z_{L-2}
    p: np.ndarray


def forward_cache(weights, norm: NormCache, x: np.ndarray) -> ForwardCache:
    h = [np.asarray(x, dtype=np.float64)]
    s, z, r = [], [], []
    last = len(weights) - 1
    for l, w in enumerate(weights):
        s_l = norm.a_norm @ h[l]
        z_l = s_l @ w
        s.append(s_l)
        z.append(z_l)
        if l < last:
            r.append((z_l > 0.0).astype(np.float64))
            h.append(z_l * r[l])
    return ForwardCache(norm=norm, h=h, s=s, z=z, r=r, p=softmax_rows(z[last]))


def gcn_forward(model: GcnModel, a_norm: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Posterior matrix of the model on a given normalized adjacency."""
    if not model.weights:
        raise ShapeMismatch("model has no layers")
    h = np.asarray(x, dtype=np.float64)
    last = len(model.weights) - 1
    for l, w in enumerate(model.weights):
        z = a_norm @ h @ w
        h = np.maximum(z, 0.0) if l < last else z
    return softmax_rows(h)


def _loss_seed(p: np.ndarray, targets: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """d(mean cross-entropy over idx)/d logits: (P - Y)/|idx| on idx rows."""
    gz = np.zeros_like(p)
    gz[idx] = p[idx]
    gz[idx, targets[idx]] -= 1.0
    gz[idx] /= len(idx)
    return gz


def normalization_vjp(b_anorm: np.ndarray, norm: NormCache,
                      freeze_normalization: bool = False) -> np.ndarray:
    """Chain an A_norm cotangent back to the raw adjacency.

    A_norm_jk = u_j u_k M_jk with M = A + I and u = rowsum(M)^(-1/2), so an
    entry A_jk feeds both the numerator M_jk and (through the row sum) every
    entry of row j. With ``freeze_normalization`` the degree terms are treated
    as constants and only the numerator path survives.
    """
    u = norm.dinv_sqrt
    direct = b_anorm * np.outer(u, u)
    if freeze_normalization:
        return direct
    sm = b_anorm * norm.m
    r = sm @ u + sm.T @ u
    c = -0.5 * np.power(norm.deg, -1.5) * r
    return direct + c[:, None]


def gcn_backward(cache: ForwardCache, weights, targets: np.ndarray, idx: np.ndarray,
                 need_adjacency: bool = False, freeze_normalization: bool = False):
    """Gradients of the mean cross-entropy over ``idx``.

    Returns ``(gw, ga)``: per-layer weight gradients, and the gradient with
    respect to the raw adjacency (or None unless requested).
    """
    n_layers = len(weights)
    a_norm = cache.norm.a_norm
    gz = _loss_seed(cache.p, targets, idx)
    gw = [None] * n_layers
    b_anorm = np.zeros_like(a_norm) if need_adjacency else None
    for l in range(n_layers - 1, -1, -1):
        gw[l] = cache.s[l].T @ gz
        if l > 0 or need_adjacency:
            gs = gz @ weights[l].T
            if need_adjacency:
                b_anorm += gs @ cache.h[l].T
            if l > 0:
                gz = (a_norm @ gs) * cache.r[l - 1]
    ga = None
    if need_adjacency:
        ga = normalization_vjp(b_anorm, cache.norm, freeze_normalization)
    return gw, ga


def grad_of_weight_grad(cache: ForwardCache, weights, targets: np.ndarray,
                        idx: np.ndarray, v: list,
                        freeze_normalization: bool = False):
    """Gradients of phi = sum_l <d loss/d W_l, V_l> w.r.t. adjacency and weights.

    This is reverse-mode applied to the backward pass itself: the forward
    intermediates, the loss-seed, and the weight-gradient recurrences are all
    re-traversed with ``V`` as the incoming cotangent. The relu masks are
    piecewise constant, so no second-order term flows through them.

    Returns ``(b_adjacency, b_weights)``.
    """
    n_layers = len(weights)
    a_norm = cache.norm.a_norm
    s, h, r, p = cache.s, cache.h, cache.r, cache.p

    # primal backward intermediates (gz per layer; gs only where the
    # recurrence consumes it)
    gz = [None] * n_layers
    gs = [None] * n_layers
    gz[n_layers - 1] = _loss_seed(p, targets, idx)
    for l in range(n_layers - 1, 0, -1):
        gs[l] = gz[l] @ weights[l].T
        gz[l - 1] = (a_norm @ gs[l]) * r[l - 1]

    b_anorm = np.zeros_like(a_norm)
    b_w = [np.zeros_like(w) for w in weights]
    b_s = [np.zeros_like(s_l) for s_l in s]
    b_gz = [np.zeros_like(gz_l) for gz_l in gz]

    # reverse over the backward pass, shallowest layer first: by the time
    # level l runs, b_gz[l-1] has received every contribution
    for l in range(n_layers):
        b_s[l] += gz[l] @ v[l].T
        b_gz[l] += s[l] @ v[l]
        if l > 0:
            b_gh = b_gz[l - 1] * r[l - 1]
            b_anorm += b_gh @ gs[l].T
            b_gs = a_norm @ b_gh
            b_gz[l] += b_gs @ weights[l]
            b_w[l] += b_gs.T @ gz[l]

    # through the loss seed and the softmax jacobian
    b_p = np.zeros_like(p)
    b_p[idx] = b_gz[n_layers - 1][idx] / len(idx)
    pb = p * b_p
    b_z = pb - p * pb.sum(axis=1, keepdims=True)

    # reverse over the forward pass
    for l in range(n_layers - 1, -1, -1):
        b_s[l] += b_z @ weights[l].T
        b_w[l] += s[l].T @ b_z
        b_anorm += b_s[l] @ h[l].T
        if l > 0:
            b_h = a_norm @ b_s[l]
            b_z = b_h * r[l - 1]

    b_adj = normalization_vjp(b_anorm, cache.norm, freeze_normalization)
    return b_adj, b_w


def train(g: Graph, cfg: TrainConfig, loss_history: Optional[list] = None) -> GcnModel:
    """Full-batch Adam training of a GCN on the graph's labeled nodes.

    Deterministic given the seed: Glorot-uniform initialization and every
    update are driven by a PRNG seeded with ``cfg.seed``. If ``loss_history``
    is a list, the pre-update training loss of every epoch is appended.
    """
    idx = np.flatnonzero(g.train_mask)
    if idx.size == 0:
        raise EmptyNodeSet("training requires at least one labeled node")
    hidden = tuple(cfg.hidden) if cfg.hidden is not None else hidden_dims(cfg.layers)
    dims = [g.features.shape[1], *hidden, g.n_classes]
    rng = np.random.default_rng(cfg.seed)
    weights = [glorot_uniform(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    states = [AdamState.zeros_like(w) for w in weights]

    norm = normalize_with_cache(g.adjacency)
    for _ in range(cfg.epochs):
        cache = forward_cache(weights, norm, g.features)
        if loss_history is not None:
            loss_history.append(cross_entropy(cache.p, g.labels, idx))
        gw, _ = gcn_backward(cache, weights, g.labels, idx)
        for l in range(len(weights)):
            weights[l], states[l] = adam_step(weights[l], gw[l], states[l],
                                              lr=cfg.lr, weight_decay=cfg.weight_decay)
    return GcnModel(weights=weights)


def predict_labels(model: GcnModel, g: Graph) -> np.ndarray:
    """Known labels on training nodes, posterior argmax everywhere else.

    Argmax ties resolve to the lowest class index.
    """
    p = gcn_forward(model, normalized_adjacency(g), g.features)
    out = np.argmax(p, axis=1).astype(np.int64)
    out[g.train_mask] = g.labels[g.train_mask]
    return out


def accuracy(model: GcnModel, g: Graph, node_idx) -> float:
    """Fraction of ``node_idx`` whose posterior argmax equals the true label."""
    node_idx = np.asarray(node_idx, dtype=np.int64)
    if node_idx.size == 0:
        raise EmptyNodeSet("accuracy needs at least one node")
    p = gcn_forward(model, normalized_adjacency(g), g.features)
    pred = np.argmax(p[node_idx], axis=1)
    return float(np.mean(pred == g.labels[node_idx]))


class BlackBox:
    """Query-only access to a model on its fixed training topology.

    Queries return posterior rows for the requested nodes, computed on the
    adjacency the model was trained with; callers may override the feature
    matrix but never the topology. The query counter grows by the number of
    returned rows and is safe to bump from worker threads.
    """

    def __init__(self, model: GcnModel, a_norm: np.ndarray, features: np.ndarray):
        self._model = model
        self._a_norm = np.asarray(a_norm, dtype=np.float64)
        self._features = np.asarray(features, dtype=np.float64)
        self.query_count = 0
        self._lock = threading.Lock()

    @property
    def n_nodes(self) -> int:
        return self._a_norm.shape[0]

    def query(self, nodes, x_override: Optional[np.ndarray] = None) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size == 0:
            raise EmptyNodeSet("query needs at least one node")
        x = self._features
        if x_override is not None:
            x = np.asarray(x_override, dtype=np.float64)
            if x.shape != self._features.shape:
                raise ShapeMismatch(
                    f"feature override {x.shape} vs expected {self._features.shape}")
        p = gcn_forward(self._model, self._a_norm, x)
        with self._lock:
            self.query_count += int(nodes.size)
        return p[nodes]


def make_black_box(model: GcnModel, g: Graph) -> BlackBox:
    """Bundle a trained model with its training topology for query access."""
    return BlackBox(model, normalized_adjacency(g), g.features)
