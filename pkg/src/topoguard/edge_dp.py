"""Edge-level differential privacy releases and the sanitized pipeline.

Both mechanisms randomize the upper-triangle adjacency bits and release a
new symmetric graph; everything downstream of a release is post-processing,
so the reconstruction pipeline run on a release never touches the raw
adjacency again (the Graph read counter makes that checkable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gnn import TrainConfig, train
from .graphs import Graph
from .pgr import PgrConfig, PgrOutput, pgr_convergence_mode, pgr_run

MECHANISMS = ("edge-rand", "lap-edge")


@dataclass(frozen=True)
class DpConfig:
    """Mechanism choice plus its privacy budget.

    ``delta`` is carried for interface completeness; both mechanisms here
    are pure (delta = 0). ``epsilon_split`` is the share of the budget the
    Laplace mechanism spends on the noisy edge count.
    """

    mechanism: str
    epsilon: float
    delta: float = 0.0
    epsilon_split: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(
                f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")
        if not 0.0 < self.epsilon_split < 1.0:
            raise ValueError("epsilon_split must lie in (0, 1)")


@dataclass(frozen=True)
class DpRelease:
    """A sanitized adjacency plus the provenance needed to audit it."""

    a_dp: np.ndarray
    mechanism: str
    epsilon: float
    delta: float
    seed: int


def edge_rand(g: Graph, epsilon: float, seed: int) -> DpRelease:
    """Randomized response on every upper-triangle bit.

    Each bit keeps its value with probability e^eps / (1 + e^eps) and flips
    with probability 1 / (1 + e^eps), independently; the result is
    symmetrized with a zero diagonal. Pure eps-DP per edge.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    a = g.adjacency
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    flip_p = 1.0 / (1.0 + math.exp(epsilon))
    flips = rng.random(iu.size) < flip_p
    bits = a[iu, ju]
    new_bits = np.where(flips, 1.0 - bits, bits)
    a_dp = np.zeros((n, n))
    a_dp[iu, ju] = new_bits
    a_dp += a_dp.T
    return DpRelease(a_dp=a_dp, mechanism="edge-rand", epsilon=epsilon,
                     delta=0.0, seed=seed)


def lap_edge(g: Graph, epsilon: float, seed: int,
             count_split: float = 0.1) -> DpRelease:
    """Laplace release: noisy edge count, then the top noisy entries win.

    ``count_split * epsilon`` buys a noisy edge count (rounded and clamped
    to [0, n*(n-1)/2]); the rest of the budget adds Laplace(1/eps2) noise to
    every upper-triangle bit, and the noisy-count largest entries become the
    released edges. Ties in the noisy values are broken by ascending pair
    index (stable sort); real ties have probability zero.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < count_split < 1.0:
        raise ValueError("count_split must lie in (0, 1)")
    a = g.adjacency
    n = a.shape[0]
    k = int(a.sum()) // 2
    total = n * (n - 1) // 2
    rng = np.random.default_rng(seed)
    eps1 = count_split * epsilon
    eps2 = (1.0 - count_split) * epsilon
    k_noisy = int(round(k + rng.laplace(0.0, 1.0 / eps1)))
    k_noisy = min(max(k_noisy, 0), total)
    iu, ju = np.triu_indices(n, k=1)
    noisy = a[iu, ju] + rng.laplace(0.0, 1.0 / eps2, size=total)
    order = np.argsort(-noisy, kind="stable")
    keep = order[:k_noisy]
    a_dp = np.zeros((n, n))
    a_dp[iu[keep], ju[keep]] = 1.0
    a_dp += a_dp.T
    return DpRelease(a_dp=a_dp, mechanism="lap-edge", epsilon=epsilon,
                     delta=0.0, seed=seed)


def make_release(g: Graph, cfg: DpConfig) -> DpRelease:
    if cfg.mechanism == "edge-rand":
        return edge_rand(g, cfg.epsilon, cfg.seed)
    return lap_edge(g, cfg.epsilon, cfg.seed, count_split=cfg.epsilon_split)


def dp_pgr(g: Graph, dp_cfg: DpConfig, pgr_cfg: PgrConfig,
           train_cfg: Optional[TrainConfig] = None,
           convergence: bool = False):
    """Sanitize, then reconstruct from the sanitized graph only.

    The raw adjacency is read exactly once, inside the mechanism. The
    reference model is retrained on the released graph, its predicted labels
    replace the raw model's, and the complement mask comes from the released
    adjacency — reconstruction is post-processing of the release, so the
    privacy guarantee of the mechanism carries over unchanged.

    Returns ``(DpRelease, PgrOutput)``.
    """
    release = make_release(g, dp_cfg)
    g_dp = Graph(release.a_dp, g.features, g.labels, g.train_mask,
                 n_classes=g.n_classes)
    if train_cfg is None:
        train_cfg = TrainConfig(seed=pgr_cfg.seed)
    f_dp = train(g_dp, train_cfg)
    runner = pgr_convergence_mode if convergence else pgr_run
    return release, runner(g_dp, f_dp, pgr_cfg)
