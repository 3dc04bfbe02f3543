"""Dense float64 substrate: affine layers, sigmoid, seeded init, SGD with momentum.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


def as_matrix(x, name="x"):
    """Coerce ``x`` to a finite, C-contiguous float64 matrix."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.004
    max_steps: int = 5000

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class AffineLayer:
    """Fully-connected layer ``y = x W^T + b`` with its momentum buffers."""

    weight: np.ndarray
    bias: np.ndarray
    vel_w: np.ndarray = field(default=None, repr=False)
    vel_b: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape[0] != self.weight.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != out_dim {self.weight.shape[0]}")
        if self.vel_w is None:
            self.vel_w = np.zeros_like(self.weight)
        if self.vel_b is None:
            self.vel_b = np.zeros_like(self.bias)

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    @classmethod
    def init(cls, in_dim, out_dim, rng, scheme="uniform_fan_in"):
        return cls(seeded_init((out_dim, in_dim), scheme, rng), np.zeros(out_dim))

    def copy(self):
        return AffineLayer(self.weight.copy(), self.bias.copy(),
                           self.vel_w.copy(), self.vel_b.copy())


def affine_forward(layer, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeError(f"input has shape {x.shape}, layer expects (*, {layer.in_dim})")
    return x @ layer.weight.T + layer.bias


def affine_backward(layer, x, grad_out):
    """Return ``(grad_w, grad_b, grad_x)`` for ``y = affine_forward(layer, x)``."""
    grad_w = grad_out.T @ x
    grad_b = grad_out.sum(axis=0)
    grad_x = grad_out @ layer.weight
    return grad_w, grad_b, grad_x


def sigmoid(x):
    """Logistic function via ``0.5 * (1 + tanh(x / 2))``; cannot overflow."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def softmax(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sgd_momentum_step(layer, grad_w, grad_b, cfg):
    """Apply one in-place momentum step to ``layer`` and return it.

    ``v <- mu * v - lr * (g + wd * p)`` then ``p <- p + v``. Weight decay is
    applied to the weight matrix and the bias alike.
    """
    grad_w = np.asarray(grad_w, dtype=np.float64)
    grad_b = np.asarray(grad_b, dtype=np.float64).reshape(-1)
    if grad_w.shape != layer.weight.shape or grad_b.shape != layer.bias.shape:
        raise ShapeError(
            f"gradient shapes {grad_w.shape}/{grad_b.shape} do not match "
            f"{layer.weight.shape}/{layer.bias.shape}")
    lr, mu, wd = cfg.learning_rate, cfg.momentum, cfg.weight_decay
    layer.vel_w *= mu
    layer.vel_w -= lr * (grad_w + wd * layer.weight)
    layer.vel_b *= mu
    layer.vel_b -= lr * (grad_b + wd * layer.bias)
    layer.weight += layer.vel_w
    layer.bias += layer.vel_b
    return layer


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def seeded_init(shape, scheme="uniform_fan_in", seed=0):
    """Draw a deterministic initial matrix.

    Schemes, with ``shape = (fan_out, fan_in)``:

    * ``uniform_fan_in``: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
    * ``glorot``: U(-r, r), r = sqrt(6 / (fan_in + fan_out))
    * ``glorot_sigmoid``: the same with r scaled by 4
    * ``normal_small``: N(0, 0.01^2)
    * ``zeros``
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) != 2 or min(shape) <= 0:
        raise ShapeError(f"shape must be two positive ints, got {shape}")
    rng = make_rng(seed)
    if scheme == "uniform_fan_in":
        bound = 1.0 / np.sqrt(shape[1])
        return rng.uniform(-bound, bound, size=shape)
    if scheme in ("glorot", "glorot_sigmoid"):
        bound = np.sqrt(6.0 / (shape[0] + shape[1]))
        if scheme == "glorot_sigmoid":
            bound *= 4.0
        return rng.uniform(-bound, bound, size=shape)
    if scheme == "normal_small":
        return rng.normal(0.0, 0.01, size=shape)
    if scheme == "zeros":
        return np.zeros(shape)
    raise ValueError(f"unknown init scheme {scheme!r}")
