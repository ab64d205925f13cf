"""Numerical forward and reverse passes for every supported layer kind.

All functions work on batches: inputs are ``(m, in_dim)`` arrays and the
gradients returned by :func:`backward` are summed over the batch.  A single
example is simply a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

ACTIVATIONS = ("sigmoid", "relu", "tanh")
KINDS = ("dense", "activation", "softmax", "scale", "matmul", "attention")


@dataclass(frozen=True)
class ConcreteLayer:
    """A layer with every dimension resolved to an integer."""

    kind: str
    in_dim: int
    out_dim: int
    has_bias: bool = True
    fn: str | None = None
    rows: int = 1
    inner: int = 0
    cols: int = 0
    factor: float = 1.0

    def weight_shapes(self) -> list[tuple[int, ...]]:
        if self.kind == "dense":
            shapes = [(self.out_dim, self.in_dim)]
            return shapes + [(self.out_dim,)] if self.has_bias else shapes
        if self.kind == "matmul":
            return [(self.inner, self.cols)]
        if self.kind == "attention":
            h, p = self.out_dim, self.in_dim
            block = [(h, p), (h,)] if self.has_bias else [(h, p)]
            return block * 3
        return []

    def fan_in(self) -> int:
        if self.kind == "matmul":
            return self.inner
        return self.in_dim


def sigmoid(z):
    # Split by sign so exp never overflows.
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(fn: str, x):
    if fn == "sigmoid":
        return sigmoid(x)
    if fn == "tanh":
        return np.tanh(x)
    if fn == "relu":
        return np.maximum(x, 0.0)
    raise SchemaError(f"unknown activation {fn!r}")


def _softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _attention_parts(layer: ConcreteLayer, x, weights):
    if layer.has_bias:
        wk, bk, wq, bq, wv, bv = weights
        k, q, v = x @ wk.T + bk, x @ wq.T + bq, x @ wv.T + bv
    else:
        wk, wq, wv = weights
        k, q, v = x @ wk.T, x @ wq.T, x @ wv.T
    # Scores are the (H x H) outer product of keys and queries, scaled.
    scores = layer.factor * (k[:, :, None] * q[:, None, :])
    z = np.einsum("mij,mj->mi", scores, v)
    return k, q, v, scores, z


def forward(layer: ConcreteLayer, x: np.ndarray, weights) -> tuple[np.ndarray, tuple]:
    """Return ``(output, cache)`` for a batch ``x`` of shape ``(m, in_dim)``."""
    kind = layer.kind
    if kind == "dense":
        y = x @ weights[0].T
        if layer.has_bias:
            y = y + weights[1]
        return y, (x,)
    if kind == "activation":
        y = _activate(layer.fn, x)
        return y, (x, y)
    if kind == "softmax":
        y = _softmax(x)
        return y, (y,)
    if kind == "scale":
        return layer.factor * x, ()
    if kind == "matmul":
        m = x.shape[0]
        xr = x.reshape(m, layer.rows, layer.inner)
        y = xr @ weights[0]
        return y.reshape(m, layer.rows * layer.cols), (xr,)
    if kind == "attention":
        k, q, v, scores, z = _attention_parts(layer, x, weights)
        return z, (x, k, q, v, scores)
    raise SchemaError(f"unsupported layer kind {kind!r}")


def backward(layer: ConcreteLayer, dy: np.ndarray, cache, weights) -> tuple[np.ndarray, list]:
    """Return ``(d_input, [d_weight, ...])``; weight gradients summed over the batch."""
    kind = layer.kind
    if kind == "dense":
        (x,) = cache
        grads = [dy.T @ x]
        if layer.has_bias:
            grads.append(dy.sum(axis=0))
        return dy @ weights[0], grads
    if kind == "activation":
        x, y = cache
        if layer.fn == "sigmoid":
            return dy * y * (1.0 - y), []
        if layer.fn == "tanh":
            return dy * (1.0 - y * y), []
        return dy * (x > 0), []
    if kind == "softmax":
        (y,) = cache
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True)), []
    if kind == "scale":
        return layer.factor * dy, []
    if kind == "matmul":
        (xr,) = cache
        m = dy.shape[0]
        dyr = dy.reshape(m, layer.rows, layer.cols)
        dm = np.einsum("mab,mac->bc", xr, dyr)
        dx = dyr @ weights[0].T
        return dx.reshape(m, layer.rows * layer.inner), [dm]
    if kind == "attention":
        x, k, q, v, scores = cache
        ds = dy[:, :, None] * v[:, None, :]
        dv = np.einsum("mij,mi->mj", scores, dy)
        dk = layer.factor * np.einsum("mij,mj->mi", ds, q)
        dq = layer.factor * np.einsum("mij,mi->mj", ds, k)
        mats = weights[0::2] if layer.has_bias else weights
        dx = dk @ mats[0] + dq @ mats[1] + dv @ mats[2]
        grads = []
        for d in (dk, dq, dv):
            grads.append(d.T @ x)
            if layer.has_bias:
                grads.append(d.sum(axis=0))
        return dx, grads
    raise SchemaError(f"unsupported layer kind {kind!r}")
