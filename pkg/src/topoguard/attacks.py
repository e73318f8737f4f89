"""Black-box topology inference attacks and their audit baselines.

Every attack sees the target model only through ``BlackBox.query``; the
protected adjacency never crosses the interface. Attacks output a ranked
edge guess of exactly ``k_a`` pairs over the declared target nodes:

* ``m_tia``   ranks pairs by posterior similarity (one metric at a time),
* ``c_tia``   trains a pair classifier on a shadow subgraph the adversary
              already knows and scores target pairs with it,
* ``i_tia``   probes pairwise influence by re-querying with one node's
              feature row nudged,
* ``pgr_tia`` refines a base attack in two rounds when the defense's edge
              budget is public: the first ``k_hat`` guesses are assumed to be
              reconstruction artifacts and excluded,
* ``random_baseline`` draws pairs uniformly, the calibration floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .gnn import BlackBox
from .graphs import EdgeSet, Graph, Subgraph, edge_set
from .numerics import AdamState, adam_step, cross_entropy, softmax_rows

METRICS = ("cosine", "chebyshev", "euclidean")


class BudgetExceedsPairs(ValueError):
    """k_a (or k_a + k_hat) is larger than the candidate pair pool."""


class ShadowTooSmall(ValueError):
    """The shadow subgraph has too few edges to train a classifier."""


class RefinementExhaustsCandidates(ValueError):
    """Two-round refinement leaves no candidates for the second round."""


class InsufficientPairs(ValueError):
    """The graph cannot supply the requested member/non-member samples."""


@dataclass(frozen=True)
class AttackConfig:
    """Target description shared by the attacks.

    ``target_nodes`` are original node ids of the subgraph under attack;
    ``k_a`` is the number of edges to output; ``metric`` applies to the
    posterior-similarity attack; ``delta`` is the influence probe scale.
    """

    target_nodes: tuple
    k_a: int
    metric: str = "cosine"
    delta: float = 1e-4
    seed: int = 0


@dataclass
class AttackResult:
    edges: EdgeSet
    scores: list  # (i, j, score) over all candidate pairs, sorted by pair
    queries_used: int


def _checked_nodes(cfg: AttackConfig) -> list:
    nodes = sorted(set(int(v) for v in cfg.target_nodes))
    if len(nodes) < 2:
        raise ValueError("an attack needs at least two target nodes")
    if cfg.k_a < 1:
        raise ValueError("k_a must be at least 1")
    return nodes


def _top_k(pairs: list, scores: np.ndarray, k: int) -> EdgeSet:
    """Highest-scoring k pairs; ties broken by ascending (i, j)."""
    order = sorted(range(len(pairs)), key=lambda t: (-scores[t], pairs[t]))
    return EdgeSet.from_pairs(pairs[t] for t in order[:k])


def pairwise_similarity(posteriors: np.ndarray, pairs: Sequence, metric: str) -> np.ndarray:
    """Similarity (= negated distance) of posterior rows for index pairs.

    ``pairs`` hold row indices into ``posteriors``. A cosine similarity with
    a zero-norm operand is treated as 0.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    p = np.asarray(posteriors, dtype=np.float64)
    a = np.asarray([i for i, _ in pairs], dtype=np.int64)
    b = np.asarray([j for _, j in pairs], dtype=np.int64)
    u, v = p[a], p[b]
    if metric == "euclidean":
        d = np.sqrt(((u - v) ** 2).sum(axis=1))
    elif metric == "chebyshev":
        d = np.abs(u - v).max(axis=1)
    else:
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        denom = nu * nv
        sim = np.zeros(len(pairs))
        ok = denom > 0.0
        sim[ok] = (u[ok] * v[ok]).sum(axis=1) / denom[ok]
        d = 1.0 - sim
    return -d


def _index_pairs(nodes: list) -> tuple:
    """All unordered pairs over ``nodes``: (original-id pairs, index pairs)."""
    id_pairs = list(combinations(nodes, 2))
    pos = {v: i for i, v in enumerate(nodes)}
    idx_pairs = [(pos[i], pos[j]) for i, j in id_pairs]
    return id_pairs, idx_pairs


def m_tia(bb: BlackBox, cfg: AttackConfig) -> AttackResult:
    """Posterior-similarity attack: nearest posterior pairs become edges."""
    nodes = _checked_nodes(cfg)
    id_pairs, idx_pairs = _index_pairs(nodes)
    if cfg.k_a > len(id_pairs):
        raise BudgetExceedsPairs(f"k_a={cfg.k_a} > {len(id_pairs)} candidate pairs")
    before = bb.query_count
    post = bb.query(nodes)
    scores = pairwise_similarity(post, idx_pairs, cfg.metric)
    return AttackResult(
        edges=_top_k(id_pairs, scores, cfg.k_a),
        scores=[(i, j, float(s)) for (i, j), s in zip(id_pairs, scores)],
        queries_used=bb.query_count - before,
    )


def influence_score(bb: BlackBox, x: np.ndarray, u: int, v: int,
                    delta: float = 1e-4) -> float:
    """L1 posterior shift at ``u`` when ``v``'s feature row is nudged.

    Both queries use the caller-supplied feature matrix; the perturbed one
    adds ``delta`` to every feature of ``v``.
    """
    x = np.asarray(x, dtype=np.float64)
    base = bb.query([u], x_override=x)
    xp = x.copy()
    xp[v, :] += delta
    pert = bb.query([u], x_override=xp)
    return float(np.abs(pert - base).sum() / delta)


def _influence_matrix(bb: BlackBox, x: np.ndarray, nodes: list, delta: float) -> np.ndarray:
    """inf[u_idx, v_idx] = influence of node v on node u, batched per v.

    One perturbed query per target node yields the posterior shift at every
    target simultaneously; entries match per-pair ``influence_score`` calls
    exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    base = bb.query(nodes, x_override=x)
    inf = np.zeros((len(nodes), len(nodes)))
    for vi, v in enumerate(nodes):
        xp = x.copy()
        xp[v, :] += delta
        pert = bb.query(nodes, x_override=xp)
        inf[:, vi] = np.abs(pert - base).sum(axis=1) / delta
    return inf


def i_tia(bb: BlackBox, x: np.ndarray, cfg: AttackConfig) -> AttackResult:
    """Influence attack: symmetrized perturbation response ranks the pairs."""
    nodes = _checked_nodes(cfg)
    id_pairs, idx_pairs = _index_pairs(nodes)
    if cfg.k_a > len(id_pairs):
        raise BudgetExceedsPairs(f"k_a={cfg.k_a} > {len(id_pairs)} candidate pairs")
    before = bb.query_count
    inf = _influence_matrix(bb, x, nodes, cfg.delta)
    sym = inf + inf.T
    scores = np.asarray([sym[a, b] for a, b in idx_pairs])
    return AttackResult(
        edges=_top_k(id_pairs, scores, cfg.k_a),
        scores=[(i, j, float(s)) for (i, j), s in zip(id_pairs, scores)],
        queries_used=bb.query_count - before,
    )


# ---------------------------------------------------------------------------
# classifier attack

_PAIR_FEATURES = 8


def _pair_features(post: np.ndarray, idx_pairs: Sequence) -> np.ndarray:
    """8 features per pair from the two posterior rows.

    Four distances (euclidean, cosine, chebyshev, correlation) plus
    mean/max of the entrywise product and of the entrywise absolute
    difference. Degenerate denominators fall back to zero similarity.
    """
    a = np.asarray([i for i, _ in idx_pairs], dtype=np.int64)
    b = np.asarray([j for _, j in idx_pairs], dtype=np.int64)
    u, v = post[a], post[b]
    diff = np.abs(u - v)
    prod = u * v

    euclid = np.sqrt(((u - v) ** 2).sum(axis=1))
    cheb = diff.max(axis=1)
    norm_u = np.linalg.norm(u, axis=1)
    norm_v = np.linalg.norm(v, axis=1)
    denom = norm_u * norm_v
    cos_sim = np.divide(prod.sum(axis=1), denom, out=np.zeros(len(a)),
                        where=denom > 0.0)
    uc = u - u.mean(axis=1, keepdims=True)
    vc = v - v.mean(axis=1, keepdims=True)
    cdenom = np.linalg.norm(uc, axis=1) * np.linalg.norm(vc, axis=1)
    corr = np.divide((uc * vc).sum(axis=1), cdenom, out=np.zeros(len(a)),
                     where=cdenom > 0.0)
    feats = np.stack([
        euclid, 1.0 - cos_sim, cheb, 1.0 - corr,
        prod.mean(axis=1), prod.max(axis=1),
        diff.mean(axis=1), diff.max(axis=1),
    ], axis=1)
    return feats


def _train_pair_mlp(feats: np.ndarray, y: np.ndarray, seed: int,
                    hidden: int = 16, epochs: int = 200, lr: float = 0.01):
    """Small 2-class MLP (one hidden layer) used by the classifier attack."""
    rng = np.random.default_rng(seed)
    d = feats.shape[1]
    lim1 = np.sqrt(6.0 / (d + hidden))
    lim2 = np.sqrt(6.0 / (hidden + 2))
    params = [rng.uniform(-lim1, lim1, (d, hidden)), np.zeros(hidden),
              rng.uniform(-lim2, lim2, (hidden, 2)), np.zeros(2)]
    states = [AdamState.zeros_like(p) for p in params]
    idx = np.arange(len(y))
    for _ in range(epochs):
        w1, b1, w2, b2 = params
        z1 = feats @ w1 + b1
        h = np.maximum(z1, 0.0)
        p = softmax_rows(h @ w2 + b2)
        gz2 = p.copy()
        gz2[idx, y] -= 1.0
        gz2 /= len(y)
        gw2 = h.T @ gz2
        gb2 = gz2.sum(axis=0)
        gh = gz2 @ w2.T
        gz1 = gh * (z1 > 0.0)
        gw1 = feats.T @ gz1
        gb1 = gz1.sum(axis=0)
        grads = [gw1, gb1, gw2, gb2]
        for k in range(4):
            params[k], states[k] = adam_step(params[k], grads[k], states[k], lr=lr)
    return params


def _mlp_member_prob(params, feats: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = params
    h = np.maximum(feats @ w1 + b1, 0.0)
    return softmax_rows(h @ w2 + b2)[:, 1]


def c_tia(bb: BlackBox, shadow: Subgraph, cfg: AttackConfig,
          min_shadow_edges: int = 20) -> AttackResult:
    """Classifier attack trained on a shadow subgraph the adversary knows.

    Member pairs are the shadow edges; an equal-sized non-member sample is
    drawn from the shadow's absent pairs. Pair features are standardized
    with the training statistics before fitting.
    """
    nodes = _checked_nodes(cfg)
    id_pairs, idx_pairs = _index_pairs(nodes)
    if cfg.k_a > len(id_pairs):
        raise BudgetExceedsPairs(f"k_a={cfg.k_a} > {len(id_pairs)} candidate pairs")
    members = shadow.edges.sorted_pairs()
    if len(members) < min_shadow_edges:
        raise ShadowTooSmall(f"{len(members)} shadow edges < {min_shadow_edges}")
    shadow_nodes = sorted(shadow.nodes)
    shadow_pairs = list(combinations(shadow_nodes, 2))
    non_members = [p for p in shadow_pairs if p not in shadow.edges]
    if not non_members:
        raise ShadowTooSmall("shadow graph is complete; no non-member pairs")
    rng = np.random.default_rng(cfg.seed)
    take = min(len(members), len(non_members))
    picked = rng.choice(len(non_members), size=take, replace=False)
    non_members = [non_members[t] for t in picked]

    before = bb.query_count
    shadow_post = bb.query(shadow_nodes)
    pos = {v: i for i, v in enumerate(shadow_nodes)}
    train_pairs = [(pos[i], pos[j]) for i, j in members + non_members]
    feats = _pair_features(shadow_post, train_pairs)
    y = np.concatenate([np.ones(len(members), dtype=np.int64),
                        np.zeros(len(non_members), dtype=np.int64)])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0
    params = _train_pair_mlp((feats - mean) / std, y, seed=cfg.seed)

    target_post = bb.query(nodes)
    target_feats = (_pair_features(target_post, idx_pairs) - mean) / std
    scores = _mlp_member_prob(params, target_feats)
    return AttackResult(
        edges=_top_k(id_pairs, scores, cfg.k_a),
        scores=[(i, j, float(s)) for (i, j), s in zip(id_pairs, scores)],
        queries_used=bb.query_count - before,
    )


def pgr_tia(bb: BlackBox, x: Optional[np.ndarray], cfg: AttackConfig,
            k_hat: int, base: str = "i-tia") -> AttackResult:
    """Two-round refinement for defenses with a public edge budget.

    Round one runs the base attack with budget ``k_hat``; those pairs are
    presumed to be synthetic-graph artifacts and removed from the candidate
    pool. Round two ranks the remainder and returns the top ``k_a``. The base
    scorers are deterministic on a fixed black box, so the scores are
    computed once and reused across rounds.
    """
    nodes = _checked_nodes(cfg)
    id_pairs, idx_pairs = _index_pairs(nodes)
    if k_hat < 0:
        raise ValueError("k_hat must be non-negative")
    if k_hat + cfg.k_a > len(id_pairs):
        raise RefinementExhaustsCandidates(
            f"k_hat={k_hat} + k_a={cfg.k_a} > {len(id_pairs)} candidate pairs")
    before = bb.query_count
    if base == "i-tia":
        if x is None:
            raise ValueError("the influence base attack needs the feature matrix")
        inf = _influence_matrix(bb, x, nodes, cfg.delta)
        sym = inf + inf.T
        scores = np.asarray([sym[a, b] for a, b in idx_pairs])
    elif base == "m-tia":
        post = bb.query(nodes)
        scores = pairwise_similarity(post, idx_pairs, cfg.metric)
    else:
        raise ValueError(f"unsupported base attack {base!r}")

    round_one = _top_k(id_pairs, scores, k_hat) if k_hat else EdgeSet(frozenset())
    keep = [t for t, pair in enumerate(id_pairs) if pair not in round_one]
    kept_pairs = [id_pairs[t] for t in keep]
    kept_scores = scores[keep]
    return AttackResult(
        edges=_top_k(kept_pairs, kept_scores, cfg.k_a),
        scores=[(i, j, float(s)) for (i, j), s in zip(kept_pairs, kept_scores)],
        queries_used=bb.query_count - before,
    )


def random_baseline(n: int, k: int, seed: int) -> EdgeSet:
    """Uniform sample of k distinct pairs over nodes 0..n-1."""
    total = n * (n - 1) // 2
    if k > total:
        raise BudgetExceedsPairs(f"k={k} > {total} pairs on {n} nodes")
    rng = np.random.default_rng(seed)
    flat = rng.choice(total, size=k, replace=False)
    # row-major decode: row i starts at i*n - i*(i+1)/2 - i... via offsets
    starts = np.concatenate([[0], np.cumsum(np.arange(n - 1, 0, -1))])
    i = np.searchsorted(starts, flat, side="right") - 1
    j = i + 1 + (flat - starts[i])
    return EdgeSet.from_pairs(zip(i.tolist(), j.tolist()))


def lmia_accuracy(scorer: Callable, g: Graph, n_pairs: int = 500,
                  trials: int = 5, seed: int = 0) -> float:
    """Edge membership inference accuracy of a pair scorer.

    Per trial: ``n_pairs`` member pairs (edges of ``g``) and ``n_pairs``
    non-member pairs, scored, thresholded at the joint median (strictly
    above = member). Returns the mean accuracy over trials; 0.5 is chance.
    """
    edges = edge_set(g).sorted_pairs()
    n = g.n_nodes
    total = n * (n - 1) // 2
    if len(edges) < n_pairs or total - len(edges) < n_pairs:
        raise InsufficientPairs(
            f"need {n_pairs} members and non-members; graph has {len(edges)} "
            f"edges out of {total} pairs")
    edge_lookup = set(edges)
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(trials):
        members = [edges[t] for t in rng.choice(len(edges), size=n_pairs, replace=False)]
        non_members = []
        seen = set()
        while len(non_members) < n_pairs:
            i, j = rng.integers(n), rng.integers(n)
            if i == j:
                continue
            pair = (int(min(i, j)), int(max(i, j)))
            if pair in edge_lookup or pair in seen:
                continue
            seen.add(pair)
            non_members.append(pair)
        scores = np.asarray([scorer(u, v) for u, v in members + non_members])
        thr = float(np.median(scores))
        correct = int((scores[:n_pairs] > thr).sum())
        correct += int((scores[n_pairs:] <= thr).sum())
        accs.append(correct / (2 * n_pairs))
    return float(np.mean(accs))
