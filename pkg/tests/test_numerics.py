import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nrt.numerics import (DimensionError, GradientCheckError, ParamSlot, activate,
                          activate_backward, affine, affine_backward, embed_lookup,
                          embed_scatter_grad, gradient_check, log_softmax, softmax)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_affine_identity_and_bias():
    np.testing.assert_array_equal(affine(np.eye(2), np.array([[1.0], [2.0]]), np.zeros((2, 1))),
                                  [[1.0], [2.0]])
    out = affine(np.zeros((1, 3)), np.array([[7.0], [-2.0], [0.5]]), np.array([[3.0]]))
    np.testing.assert_array_equal(out, [[3.0]])


def test_affine_shape_mismatch_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 1\)"):
        affine(np.zeros((2, 3)), np.zeros((4, 1)), np.zeros((2, 1)))


def test_affine_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    W = ParamSlot("W", rng.normal(size=(3, 4)))
    x = ParamSlot("x", rng.normal(size=(4, 2)))
    b = ParamSlot("b", rng.normal(size=(3, 1)))
    target = rng.normal(size=(3, 2))

    def f():
        out = affine(W.value, x.value, b.value)
        x.grad += affine_backward(out - target, W.value, x.value, W.grad, b.grad)
        return 0.5 * np.sum((out - target) ** 2)

    report = gradient_check(f, [W, x, b], tol=1e-6)
    assert report.passed, str(report)


def test_activation_values():
    assert activate(np.array(0.0), "sigmoid") == 0.5
    assert activate(np.array(0.0), "tanh") == 0.0
    # 1 / (1 + e^-2)
    assert activate(np.array(2.0), "sigmoid") == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-15)
    assert round(float(activate(np.array(2.0), "sigmoid")), 6) == 0.880797


@pytest.mark.parametrize("kind", ["sigmoid", "tanh"])
def test_activation_backward(kind):
    rng = np.random.default_rng(1)
    x = ParamSlot("x", rng.normal(size=(4, 3)))
    w = rng.normal(size=(4, 3))

    def f():
        y = activate(x.value, kind)
        x.grad += activate_backward(w, y, kind)
        return float(np.sum(w * y))

    assert gradient_check(f, [x], tol=1e-6).passed


def test_softmax_examples():
    np.testing.assert_allclose(softmax(np.zeros(3)), np.full(3, 1 / 3), rtol=0, atol=1e-15)
    np.testing.assert_array_equal(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])
    e = np.exp([1.0, 2.0, 3.0])
    np.testing.assert_allclose(softmax(np.array([1.0, 2.0, 3.0])), e / e.sum(), atol=1e-15)
    np.testing.assert_allclose(softmax(np.array([1.0, 2.0, 3.0])), [0.09003, 0.24473, 0.66524], atol=5e-6)


def test_embedding_lookup_and_scatter():
    np.testing.assert_array_equal(embed_lookup(np.eye(3), 1), [0.0, 1.0, 0.0])
    dE = np.zeros((2, 4))
    embed_scatter_grad(dE, 2, np.array([1.0, 2.0]))
    embed_scatter_grad(dE, 2, np.array([0.5, -1.0]))
    np.testing.assert_array_equal(dE[:, 2], [1.5, 1.0])
    assert not dE[:, [0, 1, 3]].any()
    with pytest.raises(IndexError):
        embed_lookup(np.eye(3), 3)
    with pytest.raises(IndexError):
        embed_scatter_grad(dE, -1, np.zeros(2))


def test_embedding_round_trip_gradient():
    rng = np.random.default_rng(2)
    E = ParamSlot("E", rng.normal(size=(5, 4)))
    idx = np.array([1, 3, 1])
    w = rng.normal(size=(5, 3))

    def f():
        cols = embed_lookup(E.value, idx)
        embed_scatter_grad(E.grad, idx, w)
        return float(np.sum(w * cols))

    assert gradient_check(f, [E], tol=1e-6).passed


def test_gradient_check_square():
    w = ParamSlot("w", np.array([3.0]))

    def f():
        w.grad += 2 * w.value
        return float(w.value[0] ** 2)

    report = gradient_check(f, [w], tol=1e-6)
    assert report.passed and report.checked == 1


def test_gradient_check_catches_corrupted_backward():
    w = ParamSlot("w", np.array([3.0, -1.0]))

    def f():
        w.grad += 2 * (2 * w.value)  # twice the true gradient
        return float(np.sum(w.value ** 2))

    assert not gradient_check(f, [w], tol=1e-4).passed


def test_gradient_check_rejects_nonfinite_loss():
    w = ParamSlot("w", np.array([0.0]))
    with pytest.raises(GradientCheckError):
        gradient_check(lambda: float("nan"), [w])


def test_param_slot_reset():
    p = ParamSlot("p", np.ones((2, 2)))
    p.grad += 3.0
    p.reset()
    assert p.grad.shape == p.value.shape and not p.grad.any()


# -- properties -------------------------------------------------------------

@given(arrays(np.float64, st.integers(1, 30), elements=finite), finite)
def test_softmax_normalized_and_shift_invariant(x, c):
    p = softmax(x)
    assert np.all(p > 0) or x.max() - x.min() > 700
    assert abs(p.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(softmax(x + c), p, rtol=0, atol=1e-12)


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_log_softmax_consistent(x):
    lp = log_softmax(x)
    assert np.all(np.isfinite(lp))
    assert abs(np.logaddexp.reduce(lp)) <= 1e-12


@given(arrays(np.float64, st.integers(1, 50), elements=finite))
def test_sigmoid_symmetry(x):
    s = activate(x, "sigmoid")
    np.testing.assert_allclose(s + activate(-x, "sigmoid"), 1.0, rtol=0, atol=1e-12)
    assert np.all((s >= 0) & (s <= 1))


@given(arrays(np.float64, st.integers(1, 50), elements=finite), st.sampled_from(["sigmoid", "tanh"]))
def test_activations_finite(x, kind):
    y = activate(x, kind)
    assert np.all(np.isfinite(y))
    assert np.all(np.isfinite(activate_backward(np.ones_like(x), y, kind)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_affine_backward_property(d, k, batch, seed):
    rng = np.random.default_rng(seed)
    W = ParamSlot("W", rng.normal(size=(d, k)))
    x = ParamSlot("x", rng.normal(size=(k, batch)))
    b = ParamSlot("b", rng.normal(size=(d, 1)))
    w = rng.normal(size=(d, batch))

    def f():
        out = np.tanh(affine(W.value, x.value, b.value))
        x.grad += affine_backward(activate_backward(w, out, "tanh"), W.value, x.value, W.grad, b.grad)
        return float(np.sum(w * out))

    assert gradient_check(f, [W, x, b], tol=1e-4).passed
