import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import central_diff, rel_err
from xmmr.nd_core import (AffineLayer, OptimizerConfig, ShapeError, affine_backward,
                          affine_forward, as_matrix, seeded_init, sgd_momentum_step, sigmoid,
                          softmax)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_affine_identity():
    layer = AffineLayer(np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(affine_forward(layer, [[3.0, 4.0]]), [[3.0, 4.0]])


def test_affine_hand_example():
    layer = AffineLayer([[1.0, 1.0], [1.0, -1.0]], [1.0, 0.0])
    np.testing.assert_array_equal(affine_forward(layer, [[2.0, 3.0]]), [[6.0, -1.0]])


def test_affine_wrong_cols():
    layer = AffineLayer(np.eye(2), np.zeros(2))
    with pytest.raises(ShapeError):
        affine_forward(layer, np.ones((1, 3)))


def test_bias_shape_checked():
    with pytest.raises(ShapeError):
        AffineLayer(np.eye(2), np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(a=finite, b=finite, seed=st.integers(0, 2**31))
def test_affine_linearity(a, b, seed):
    r = np.random.default_rng(seed)
    layer = AffineLayer(r.normal(size=(3, 4)), r.normal(size=3))
    x, y = r.normal(size=(2, 4)), r.normal(size=(2, 4))
    lhs = affine_forward(layer, a * x + b * y)
    rhs = a * affine_forward(layer, x) + b * affine_forward(layer, y) - (a + b - 1) * layer.bias
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * max(1.0, abs(a), abs(b)) * 100)


def test_affine_backward_matches_fd(rng):
    layer = AffineLayer(rng.normal(size=(3, 4)), rng.normal(size=3))
    x = rng.normal(size=(5, 4))
    up = rng.normal(size=(5, 3))
    gw, gb, gx = affine_backward(layer, x, up)
    loss = lambda: float(np.sum(affine_forward(layer, x) * up))
    assert rel_err(gw, central_diff(loss, layer.weight)) < 1e-8
    assert rel_err(gb, central_diff(loss, layer.bias)) < 1e-8
    assert rel_err(gx, central_diff(loss, x)) < 1e-8


def test_sigmoid_examples():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(math.log(3.0)) == pytest.approx(0.75, abs=1e-15)
    with np.errstate(over="raise"):
        big = sigmoid(np.array([800.0, -800.0, 1e308, -1e308]))
    np.testing.assert_array_equal(big, [1.0, 0.0, 1.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, st.integers(1, 50), elements=st.floats(-700, 700)))
def test_sigmoid_symmetry_and_range(x):
    s = sigmoid(x)
    np.testing.assert_allclose(s + sigmoid(-x), 1.0, atol=1e-12)
    assert np.all((s >= 0) & (s <= 1))
    small = np.abs(x) < 30
    assert np.all((s[small] > 0) & (s[small] < 1))


def test_softmax_rows_sum_to_one(rng):
    p = softmax(rng.normal(size=(4, 7)) * 50)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_sgd_zero_grad_no_change():
    layer = AffineLayer([[1.0, 2.0]], [3.0])
    cfg = OptimizerConfig(0.1, 0.9, 0.0)
    sgd_momentum_step(layer, np.zeros((1, 2)), np.zeros(1), cfg)
    np.testing.assert_array_equal(layer.weight, [[1.0, 2.0]])
    np.testing.assert_array_equal(layer.bias, [3.0])


def test_sgd_scalar_hand_example():
    layer = AffineLayer([[1.0]], [0.0])
    sgd_momentum_step(layer, [[1.0]], [0.0], OptimizerConfig(0.1, 0.0, 0.0))
    assert layer.weight[0, 0] == pytest.approx(0.9, abs=1e-15)


def test_sgd_momentum_unrolled():
    layer = AffineLayer([[0.0]], [0.0])
    cfg = OptimizerConfig(0.1, 0.9, 0.0)
    sgd_momentum_step(layer, [[1.0]], [0.0], cfg)
    w1 = layer.weight[0, 0]
    sgd_momentum_step(layer, [[1.0]], [0.0], cfg)
    assert layer.weight[0, 0] - w1 == pytest.approx(-0.1 * 1.9, abs=1e-15)


def test_sgd_plain_descent_when_no_momentum_or_decay(rng):
    W, b = rng.normal(size=(3, 2)), rng.normal(size=3)
    gw, gb = rng.normal(size=(3, 2)), rng.normal(size=3)
    layer = AffineLayer(W.copy(), b.copy())
    sgd_momentum_step(layer, gw, gb, OptimizerConfig(0.05, 0.0, 0.0))
    np.testing.assert_array_equal(layer.weight, W + (0.0 - 0.05 * gw))
    np.testing.assert_array_equal(layer.bias, b + (0.0 - 0.05 * gb))


def test_sgd_weight_decay():
    layer = AffineLayer([[2.0]], [0.0])
    sgd_momentum_step(layer, [[0.0]], [0.0], OptimizerConfig(0.1, 0.0, 0.5))
    assert layer.weight[0, 0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_sgd_shape_mismatch():
    layer = AffineLayer([[1.0]], [0.0])
    with pytest.raises(ShapeError):
        sgd_momentum_step(layer, np.zeros((2, 1)), [0.0], OptimizerConfig())


def test_optimizer_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(momentum=1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(weight_decay=-1)
    with pytest.raises(ValueError):
        OptimizerConfig(learning_rate=-0.1)
    cfg = OptimizerConfig()
    assert (cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.max_steps) == (0.001, 0.9, 0.004, 5000)


@pytest.mark.parametrize("scheme", ["uniform_fan_in", "glorot", "glorot_sigmoid", "normal_small"])
def test_seeded_init_determinism(scheme):
    a = seeded_init((20, 30), scheme, 7)
    b = seeded_init((20, 30), scheme, 7)
    c = seeded_init((20, 30), scheme, 8)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_seeded_init_statistics():
    W = seeded_init((1000, 1000), "uniform_fan_in", 3)
    bound = 1 / math.sqrt(1000)
    assert np.abs(W).max() <= bound
    sigma = bound / math.sqrt(3) / math.sqrt(W.size)
    assert abs(W.mean()) < 3 * sigma


def test_seeded_init_errors():
    with pytest.raises(ShapeError):
        seeded_init((0, 3), "uniform_fan_in", 0)
    with pytest.raises(ValueError):
        seeded_init((2, 3), "nope", 0)
    np.testing.assert_array_equal(seeded_init((2, 3), "zeros", 0), np.zeros((2, 3)))


def test_as_matrix():
    assert as_matrix([1.0, 2.0]).shape == (1, 2)
    with pytest.raises(ValueError):
        as_matrix([[np.nan]])
    with pytest.raises(ShapeError):
        as_matrix(np.zeros((1, 1, 1)))
