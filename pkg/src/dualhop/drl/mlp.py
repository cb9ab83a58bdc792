"""Dense networks with hand-written reverse-mode gradients.

Batches are row-major: an input of shape (B, in) maps to (B, out).
Layer weights are stored as (in, out) matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "linear", "tanh", "pi_tanh")


class StaleCacheError(RuntimeError):
    """A forward cache no longer matches the parameters it came from."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]
    version: int = 0

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have equal length")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            if b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not match weights {w.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[0]} does not chain")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], list(self.activations))

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def touch(self):
        self.version += 1


@dataclass
class MlpCache:
    owner: int
    version: int
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)


def init_mlp(sizes, activations, rng: np.random.Generator, final_scale: float = 3e-3) -> MlpParams:
    """Fan-in uniform init for hidden layers, small uniform init for the last."""
    weights, biases = [], []
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = final_scale if i == n_layers - 1 else 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return MlpParams(weights, biases, list(activations))


def _activate(act, z):
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "linear":
        return z
    if act == "tanh":
        return np.tanh(z)
    return math.pi * np.tanh(z)


def _activation_grad(act, z, y):
    if act == "relu":
        return (z > 0).astype(z.dtype)
    if act == "linear":
        return np.ones_like(z)
    if act == "tanh":
        return 1.0 - y * y
    t = y / math.pi
    return math.pi * (1.0 - t * t)


def mlp_forward(params: MlpParams, x):
    """Returns (output, cache); the cache feeds :func:`mlp_backward`."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[-1] != params.in_dim:
        raise ValueError(f"input width {h.shape[-1]} != network input {params.in_dim}")
    cache = MlpCache(owner=id(params), version=params.version)
    for w, b, act in zip(params.weights, params.biases, params.activations):
        cache.inputs.append(h)
        z = h @ w + b
        h = _activate(act, z)
        cache.pre.append(z)
        cache.outputs.append(h)
    return (h[0] if squeeze else h), cache


def mlp_backward(params: MlpParams, cache: MlpCache, output_gradient):
    """Gradients of sum(output * output_gradient).

    Returns (weight_grads, bias_grads, input_grad).
    """
    if cache.owner != id(params) or cache.version != params.version:
        raise StaleCacheError("forward cache is stale: parameters changed since the forward pass")
    g = np.asarray(output_gradient, dtype=float)
    squeeze = g.ndim == 1
    if squeeze:
        g = g[None, :]
    n = len(params.weights)
    w_grads: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in reversed(range(n)):
        g = g * _activation_grad(params.activations[i], cache.pre[i], cache.outputs[i])
        w_grads[i] = cache.inputs[i].T @ g
        b_grads[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    return w_grads, b_grads, (g[0] if squeeze else g)


class Adam:
    """First/second-moment gradient descent with bias correction."""

    def __init__(self, params: MlpParams, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]

    def step(self, w_grads, b_grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for arr, g, m, v in zip(self.params.arrays(), [*w_grads, *b_grads], self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            arr -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        self.params.touch()

    def state(self) -> dict:
        return {"t": self.t, "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}


def polyak_update(target: MlpParams, source: MlpParams, tau: float):
    """target <- tau * source + (1 - tau) * target, in place."""
    for t_arr, s_arr in zip(target.arrays(), source.arrays()):
        t_arr *= 1.0 - tau
        t_arr += tau * s_arr
    target.touch()
