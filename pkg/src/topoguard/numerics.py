"""Dense float64 numerics: activations, losses, Adam, finite differences.

Everything in the package runs in double precision. The finite-difference
oracle here is the ground truth that every analytic gradient (training
gradients, adjacency gradients, meta-gradients) is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeMismatch(ValueError):
    """Operands disagree on dimensions."""


class EmptyNodeSet(ValueError):
    """An index set that must be non-empty is empty."""


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax.

    The row maximum is subtracted before exponentiation so large logits
    cannot overflow; the result is invariant under per-row shifts.

    Parameters
    ----------
    z : (n, c) ndarray

    Returns
    -------
    (n, c) ndarray with non-negative rows summing to 1.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d array, got shape {z.shape}")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(p: np.ndarray, targets: np.ndarray, idx) -> float:
    """Mean negative log-likelihood of ``targets`` over the rows in ``idx``.

    Probabilities are clamped below at 1e-12 so a confident miss produces a
    large finite loss rather than inf.
    """
    p = np.asarray(p, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise EmptyNodeSet("cross_entropy needs at least one row index")
    if p.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d probability array, got shape {p.shape}")
    picked = p[idx, targets[idx]]
    return float(-np.log(np.clip(picked, 1e-12, None)).mean())


@dataclass(frozen=True)
class AdamState:
    """Per-parameter Adam moments; ``t`` counts completed updates."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(param, dtype=np.float64),
                   v=np.zeros_like(param, dtype=np.float64))


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float = 0.01, weight_decay: float = 0.0):
    """One bias-corrected Adam update; returns ``(new_param, new_state)``.

    Weight decay is L2-coupled: ``weight_decay * param`` is added to the
    gradient before the moment updates (classic Adam, not the decoupled
    variant). Inputs are never mutated.
    """
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape:
        raise ShapeMismatch(f"param {param.shape} vs grad {grad.shape}")
    g = grad + weight_decay * param
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_param = param - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m=m, v=v, t=t, beta1=state.beta1,
                          beta2=state.beta2, eps=state.eps)
    return new_param, new_state


def finite_diff(loss_fn, at: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix.

    Entry (i, j) is ``(f(X + h e_ij) - f(X - h e_ij)) / (2 h)``. This is the
    independent oracle for the analytic gradients: it only ever calls the
    forward evaluation, never any gradient code.
    """
    at = np.asarray(at, dtype=np.float64)
    grad = np.zeros_like(at)
    it = np.nditer(at, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        bumped = at.copy()
        bumped[ij] += h
        up = float(loss_fn(bumped))
        bumped[ij] -= 2.0 * h
        down = float(loss_fn(bumped))
        grad[ij] = (up - down) / (2.0 * h)
    return grad
