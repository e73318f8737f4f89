"""Shared fixtures: small deterministic graphs and a trained model.

Session-scoped fixtures carry the expensive artifacts (an SBM graph with
cleanly separable blocks and a model trained on it); per-test graphs are
built by the helpers below so each test owns its structure.
"""

import numpy as np
import pytest

from topoguard import Graph, TrainConfig, generate_sbm, train


def path_graph(n, n_classes=2, feature_dim=3, seed=0):
    """Path 0-1-...-(n-1) with random features and alternating labels."""
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1.0
    rng = np.random.default_rng(seed)
    feats = rng.random((n, feature_dim))
    labels = np.arange(n) % n_classes
    mask = np.zeros(n, dtype=bool)
    mask[0] = True
    return Graph(a, feats, labels, mask, n_classes=n_classes)


def edgeless_graph(n, n_classes=2, feature_dim=3, seed=0):
    rng = np.random.default_rng(seed)
    a = np.zeros((n, n))
    labels = np.arange(n) % n_classes
    mask = np.zeros(n, dtype=bool)
    mask[0] = True
    return Graph(a, rng.random((n, feature_dim)), labels, mask, n_classes=n_classes)


def random_graph(n, p=0.3, n_classes=2, feature_dim=4, seed=0):
    """Erdos-Renyi style graph with a one-node-per-class training mask."""
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    a = np.zeros((n, n))
    hits = rng.random(iu[0].size) < p
    a[iu[0][hits], iu[1][hits]] = 1.0
    a += a.T
    feats = rng.random((n, feature_dim))
    labels = rng.integers(n_classes, size=n)
    labels[:n_classes] = np.arange(n_classes)  # every class present
    mask = np.zeros(n, dtype=bool)
    mask[:n_classes] = True
    return Graph(a, feats, labels, mask, n_classes=n_classes)


@pytest.fixture(scope="session")
def sbm60():
    """60-node, 4-block SBM with strong feature signal; edges matter less."""
    return generate_sbm([15, 15, 15, 15], 0.2, 0.02, 12, 0.85, seed=7)


@pytest.fixture(scope="session")
def model60(sbm60):
    return train(sbm60, TrainConfig(epochs=60, seed=1))


@pytest.fixture(scope="session")
def sparse100():
    """Near-tree 100-node SBM; the regime where influence attacks excel."""
    return generate_sbm([10] * 10, 0.05, 0.002, 16, 0.85, seed=100)


@pytest.fixture(scope="session")
def model100(sparse100):
    return train(sparse100, TrainConfig(epochs=15, seed=0))
