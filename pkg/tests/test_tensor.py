"""Autodiff primitives: forward values, gradients, and the loss contract."""

import numpy as np
import pytest

from modemil.nn import Tensor, cce_loss, grad_check, no_grad
from modemil.nn.tensor import clip, concat, exp, log, relu, sigmoid, softmax, sqrt, tanh


def test_add_mul_broadcast_gradients():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4,)), requires_grad=True)
    out = (a * b + b).sum()
    out.backward()
    assert a.grad.shape == (3, 4)
    assert b.grad.shape == (4,)
    np.testing.assert_allclose(a.grad, np.broadcast_to(b.data, (3, 4)))
    np.testing.assert_allclose(b.grad, a.data.sum(axis=0) + 3.0)


def test_matmul_batched_gradient():
    rng = np.random.default_rng(1)
    h = Tensor(rng.normal(size=(2, 4, 5)), requires_grad=True)
    w = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    err = grad_check(lambda: ((h @ w) * Tensor(rng.normal(size=(2, 4, 3)))).sum(), [h, w], rng=rng)
    assert err < 1e-7


def test_matmul_requires_two_dims():
    with pytest.raises(ValueError):
        Tensor(np.ones(3)) @ Tensor(np.ones((3, 2)))


def test_getitem_basic_and_fancy():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    x[:, 2].sum().backward()
    expected = np.zeros((4, 5))
    expected[:, 2] = 1.0
    np.testing.assert_array_equal(x.grad, expected)

    y = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    rows = np.array([0, 0, 3])
    cols = np.array([1, 1, 2])
    y[(rows, cols)].sum().backward()
    expected = np.zeros((4, 5))
    expected[0, 1] = 2.0  # repeated index accumulates
    expected[3, 2] = 1.0
    np.testing.assert_array_equal(y.grad, expected)


def test_reductions_and_shapes():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    m = x.mean(axis=(0, 1))
    assert m.shape == (4,)
    m.sum().backward()
    np.testing.assert_allclose(x.grad, np.full((2, 3, 4), 1.0 / 6.0))

    y = Tensor(rng.normal(size=(2, 6)))
    assert y.reshape(3, 4).shape == (3, 4)
    assert y.transpose((1, 0)).shape == (6, 2)


def test_concat_gradient_routing():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones((2, 2)), requires_grad=True)
    out = concat([a, b], axis=1)
    assert out.shape == (2, 5)
    (out * Tensor(np.arange(10.0).reshape(2, 5))).sum().backward()
    np.testing.assert_array_equal(a.grad, [[0, 1, 2], [5, 6, 7]])
    np.testing.assert_array_equal(b.grad, [[3, 4], [8, 9]])


def test_elementwise_gradients():
    rng = np.random.default_rng(4)
    x = Tensor(rng.uniform(0.5, 2.0, size=(3, 3)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 3)))
    for fn in (exp, log, sqrt, tanh, sigmoid, relu):
        err = grad_check(lambda fn=fn: (fn(x) * w).sum(), [x], rng=rng)
        assert err < 1e-7, fn.__name__


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(5)
    s = softmax(Tensor(rng.normal(size=(4, 6))), axis=1)
    np.testing.assert_allclose(s.data.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(s.data > 0)


def test_clip_blocks_gradient_outside_range():
    x = Tensor(np.array([-1.0, 0.2, 0.8, 2.0]), requires_grad=True)
    clip(x, 0.0, 1.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 1.0, 0.0])


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 2.0).sum()
    assert y._backward is None and not y.requires_grad


def test_backward_needs_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


class TestCceLoss:
    def test_certain_prediction_has_zero_loss(self):
        probs = Tensor(np.array([0.0, 1.0, 0.0]))
        assert abs(float(cce_loss(probs, 1).data)) < 1e-6

    def test_inverse_e_gives_unit_loss(self):
        probs = Tensor(np.array([0.2, 1.0 / np.e, 0.4]))
        assert abs(float(cce_loss(probs, 1).data) - 1.0) < 1e-12

    def test_matches_one_hot_oracle(self):
        rng = np.random.default_rng(6)
        p = rng.uniform(0.05, 0.95, size=8)
        label = 5
        one_hot = np.zeros(8)
        one_hot[label] = 1.0
        oracle = -np.sum(one_hot * np.log(p))
        assert abs(float(cce_loss(Tensor(p), label).data) - oracle) < 1e-12

    def test_batch_loss_is_mean(self):
        rng = np.random.default_rng(7)
        p = rng.uniform(0.05, 0.95, size=(4, 8))
        labels = np.array([0, 3, 7, 2])
        oracle = np.mean([-np.log(p[i, labels[i]]) for i in range(4)])
        assert abs(float(cce_loss(Tensor(p), labels).data) - oracle) < 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            cce_loss(Tensor(np.full(8, 0.5)), 8)
        with pytest.raises(ValueError):
            cce_loss(Tensor(np.full((2, 8), 0.5)), np.array([0, -1]))
