"""Numeric kernels: softmax, cross-entropy, Adam, finite differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from topoguard.numerics import (AdamState, EmptyNodeSet, ShapeMismatch,
                                adam_step, cross_entropy, finite_diff,
                                softmax_rows)

# --------------------------------------------------------------------------
# softmax


def test_softmax_known_row():
    p = softmax_rows(np.array([[1.0, 2.0, 3.0]]))
    np.testing.assert_allclose(
        p, [[0.09003057, 0.24472847, 0.66524096]], atol=1e-8)


def test_softmax_uniform_on_equal_logits():
    p = softmax_rows(np.zeros((2, 3)))
    np.testing.assert_allclose(p, np.full((2, 3), 1.0 / 3.0), atol=1e-15)


def test_softmax_no_overflow_on_huge_logits():
    p = softmax_rows(np.array([[1000.0, 0.0]]))
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p[0, 0], 1.0, atol=1e-12)


def test_softmax_shift_invariance():
    z = np.array([[0.3, -1.2, 4.0], [2.0, 2.0, -7.0]])
    np.testing.assert_allclose(softmax_rows(z), softmax_rows(z + 123.0),
                               atol=1e-12)


def test_softmax_rejects_non_2d():
    with pytest.raises(ShapeMismatch):
        softmax_rows(np.array([1.0, 2.0]))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (4, 5),
                  elements=st.floats(-50.0, 50.0, allow_nan=False)))
def test_softmax_rows_sum_to_one(z):
    p = softmax_rows(z)
    np.testing.assert_allclose(p.sum(axis=1), np.ones(4), atol=1e-12)
    assert np.all(p >= 0.0)


# --------------------------------------------------------------------------
# cross-entropy


def test_cross_entropy_perfect_prediction_is_zero():
    p = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert cross_entropy(p, np.array([0, 1]), [0, 1]) == 0.0


def test_cross_entropy_uniform_is_log_c():
    p = np.full((3, 4), 0.25)
    got = cross_entropy(p, np.array([0, 1, 2]), [0, 1, 2])
    assert got == pytest.approx(math.log(4.0), abs=1e-12)


def test_cross_entropy_known_value():
    p = np.array([[0.7, 0.3]])
    got = cross_entropy(p, np.array([0]), [0])
    assert got == pytest.approx(0.35667494393873245, abs=1e-12)


def test_cross_entropy_clamps_tiny_probabilities():
    p = np.array([[0.0, 1.0]])
    got = cross_entropy(p, np.array([0]), [0])
    assert got == pytest.approx(-math.log(1e-12), rel=1e-9)
    assert math.isfinite(got)


def test_cross_entropy_subset_of_rows():
    p = np.array([[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]])
    got = cross_entropy(p, np.array([0, 0, 1]), [0, 2])
    want = -(math.log(0.9) + math.log(0.9)) / 2.0
    assert got == pytest.approx(want, abs=1e-12)


def test_cross_entropy_rejects_empty_index():
    with pytest.raises(EmptyNodeSet):
        cross_entropy(np.full((2, 2), 0.5), np.array([0, 1]), [])


# --------------------------------------------------------------------------
# Adam


def test_adam_zero_gradient_leaves_param_unchanged():
    param = np.array([[1.0, -2.0], [0.5, 3.0]])
    new, state = adam_step(param, np.zeros_like(param),
                           AdamState.zeros_like(param))
    np.testing.assert_array_equal(new, param)
    assert state.t == 1


def test_adam_first_step_magnitude():
    # with g=1 the bias-corrected moments are exactly 1, so the first update
    # moves by lr / (1 + eps)
    param = np.array([1.0])
    new, _ = adam_step(param, np.array([1.0]), AdamState.zeros_like(param),
                       lr=0.01)
    assert new[0] == pytest.approx(1.0 - 0.01 / (1.0 + 1e-8), abs=1e-16)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (3,),
                  elements=st.floats(0.001, 10.0, allow_nan=False)),
       st.booleans())
def test_adam_first_step_is_signed_lr(mag, negate):
    # first-step update ~ -lr * sign(grad) whenever |grad| >> eps
    grad = -mag if negate else mag
    param = np.zeros(3)
    new, _ = adam_step(param, grad, AdamState.zeros_like(param), lr=0.01)
    np.testing.assert_allclose(new, -0.01 * np.sign(grad), rtol=1e-4)


def test_adam_weight_decay_pulls_toward_zero():
    param = np.array([2.0, -2.0])
    new, _ = adam_step(param, np.zeros_like(param),
                       AdamState.zeros_like(param), lr=0.01, weight_decay=0.1)
    assert np.all(np.abs(new) < np.abs(param))
    assert np.all(np.sign(new) == np.sign(param))


def test_adam_is_deterministic_and_pure():
    param = np.array([1.0, 2.0])
    grad = np.array([0.3, -0.7])
    state = AdamState.zeros_like(param)
    a1, s1 = adam_step(param, grad, state, lr=0.05)
    a2, s2 = adam_step(param, grad, state, lr=0.05)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(s1.m, s2.m)
    np.testing.assert_array_equal(param, [1.0, 2.0])  # inputs not mutated
    assert state.t == 0


def test_adam_rejects_shape_mismatch():
    param = np.zeros((2, 2))
    with pytest.raises(ShapeMismatch):
        adam_step(param, np.zeros(3), AdamState.zeros_like(param))


def test_adam_converges_on_quadratic():
    # minimize 0.5 * x^2; gradient is x
    x = np.array([5.0])
    state = AdamState.zeros_like(x)
    for _ in range(2000):
        x, state = adam_step(x, x.copy(), state, lr=0.05)
    assert abs(x[0]) < 1e-3


# --------------------------------------------------------------------------
# finite differences


def test_finite_diff_quadratic_matches_gradient():
    x = np.array([[1.0, -2.0], [0.5, 4.0]])
    grad = finite_diff(lambda m: 0.5 * float((m * m).sum()), x)
    np.testing.assert_allclose(grad, x, atol=1e-9)


def test_finite_diff_linear_is_exact():
    a = np.array([[2.0, -1.0, 0.5]])
    x = np.array([[0.3, 0.7, -0.2]])
    grad = finite_diff(lambda m: float((a * m).sum()), x)
    np.testing.assert_allclose(grad, a, atol=1e-9)


def test_finite_diff_does_not_mutate_input():
    x = np.array([[1.0, 2.0]])
    finite_diff(lambda m: float(m.sum()), x)
    np.testing.assert_array_equal(x, [[1.0, 2.0]])
