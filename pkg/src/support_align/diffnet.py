"""Small feed-forward networks with hand-written reverse-mode gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Layer",
    "Network",
    "StaleCacheError",
    "softplus",
    "sigmoid",
    "logistic_discriminator_loss",
    "SGD",
    "Adam",
]

LEAKY_SLOPE = 0.2
ACTIVATIONS = ("leaky_relu", "tanh", "identity")


class StaleCacheError(RuntimeError):
    """backward() called without a matching forward()."""


def softplus(z):
    """``log(1 + exp(z))`` without overflow; exact branches beyond ``|z| > 30``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z > 30.0
    small = z < -30.0
    mid = ~(big | small)
    out[big] = z[big] + np.exp(-z[big])
    out[small] = np.exp(z[small])
    out[mid] = np.log1p(np.exp(z[mid]))
    return out


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def logistic_discriminator_loss(logits_p, logits_q):
    """Mean log-loss of a logit discriminator labelling ``p`` as 1 and ``q`` as 0.

    ``mean(softplus(-g(x_p))) + mean(softplus(g(x_q)))``. Returns
    ``(loss, grad_p, grad_q)`` with gradients with respect to each logit.
    """
    lp = np.asarray(logits_p, dtype=float).ravel()
    lq = np.asarray(logits_q, dtype=float).ravel()
    if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(lq))):
        raise FloatingPointError("non-finite discriminator logits")
    loss = float(np.mean(softplus(-lp)) + np.mean(softplus(lq)))
    grad_p = -sigmoid(-lp) / lp.size
    grad_q = sigmoid(lq) / lq.size
    return loss, grad_p, grad_q


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = "identity"
    grad_weight: np.ndarray = field(init=False, repr=False)
    grad_bias: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=float, ndmin=2)
        self.bias = np.array(self.bias, dtype=float, ndmin=1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias.shape != (self.weight.shape[1],):
            raise ValueError("bias does not match weight output size")
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)


class Network:
    """Chain of affine layers, each followed by an activation.

    ``forward`` caches pre- and post-activations; ``backward`` consumes the
    cache, fills the per-layer gradient buffers and returns the gradient with
    respect to the input batch.
    """

    def __init__(self, layers: list[Layer]):
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ValueError("layer dimensions do not chain")
        self.layers = layers
        self._cache = None

    @classmethod
    def mlp(
        cls,
        sizes: list[int],
        rng: np.random.Generator,
        hidden_activation: str = "leaky_relu",
        output_activation: str = "identity",
        zero_last: bool = False,
    ) -> "Network":
        """Uniform fan-in initialization: ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = k == len(sizes) - 2
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
            if last and zero_last:
                w[:] = 0.0
                b[:] = 0.0
            layers.append(Layer(w, b, output_activation if last else hidden_activation))
        return cls(layers)

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].weight.shape[0]] + [l.weight.shape[1] for l in self.layers]

    @property
    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def parameters(self) -> list[np.ndarray]:
        return [arr for l in self.layers for arr in (l.weight, l.bias)]

    def gradients(self) -> list[np.ndarray]:
        return [arr for l in self.layers for arr in (l.grad_weight, l.grad_bias)]

    def zero_grad(self) -> None:
        for g in self.gradients():
            g[...] = 0.0

    def forward(self, x) -> np.ndarray:
        a = np.asarray(x, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.shape[1] != self.layers[0].weight.shape[0]:
            raise ValueError(f"input width {a.shape[1]} does not match {self.layers[0].weight.shape[0]}")
        cache = [a]
        for layer in self.layers:
            z = a @ layer.weight + layer.bias
            a = _activate(z, layer.activation)
            cache.append((z, a))
        self._cache = cache
        return a

    __call__ = forward

    def backward(self, grad_output, accumulate: bool = False) -> np.ndarray:
        """Reverse pass for the last ``forward``; returns d(loss)/d(input)."""
        if self._cache is None:
            raise StaleCacheError("backward() requires a preceding forward()")
        cache, self._cache = self._cache, None
        g = np.asarray(grad_output, dtype=float)
        out_width = self.layers[-1].weight.shape[1]
        g = g.reshape(-1, out_width)
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            z, a = cache[k + 1]
            inp = cache[k] if k == 0 else cache[k][1]
            g = g * _activation_grad(z, a, layer.activation)
            gw = inp.T @ g
            gb = g.sum(axis=0)
            if accumulate:
                layer.grad_weight += gw
                layer.grad_bias += gb
            else:
                layer.grad_weight[...] = gw
                layer.grad_bias[...] = gb
            g = g @ layer.weight.T
        return g

    def copy(self) -> "Network":
        return Network([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def save(self, path) -> None:
        """Text snapshot: a ``sizes`` line, an ``activations`` line, then one
        comma-separated row-major line per weight matrix and bias vector."""
        lines = [
            "sizes," + ",".join(str(s) for s in self.sizes),
            "activations," + ",".join(l.activation for l in self.layers),
        ]
        for arr in self.parameters():
            lines.append(",".join(repr(float(v)) for v in arr.ravel()))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Network":
        rows = Path(path).read_text().strip().splitlines()
        head, acts = rows[0].split(","), rows[1].split(",")
        if head[0] != "sizes" or acts[0] != "activations":
            raise ValueError("not a network snapshot")
        sizes = [int(s) for s in head[1:]]
        values = rows[2:]
        if len(values) != 2 * (len(sizes) - 1):
            raise ValueError("snapshot has the wrong number of parameter rows")
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = np.array([float(v) for v in values[2 * k].split(",")]).reshape(fan_in, fan_out)
            b = np.array([float(v) for v in values[2 * k + 1].split(",")])
            layers.append(Layer(w, b, acts[k + 1]))
        return cls(layers)


class SGD:
    def __init__(self, lr: float, momentum: float = 0.0, weight_decay: float = 0.0):
        self.lr, self.momentum, self.weight_decay = lr, momentum, weight_decay
        self.velocity: list[np.ndarray] | None = None
        self.steps = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            if v.shape != p.shape:
                raise ValueError("optimizer state does not match parameters")
            g = g + self.weight_decay * p
            v *= self.momentum
            v += g
            p -= self.lr * v
        self.steps += 1


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None
        self.steps = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.steps += 1
        c1 = 1.0 - self.beta1**self.steps
        c2 = 1.0 - self.beta2**self.steps
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if m.shape != p.shape:
                raise ValueError("optimizer state does not match parameters")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
