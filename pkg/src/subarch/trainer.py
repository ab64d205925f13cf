"""Backpropagation and shuffling-type SGD with a fixed learning rate.

Training is single-example: one step is one gradient evaluation.  Each
epoch visits the batch in a fresh uniform permutation drawn from the
``shuffle_seed`` stream, and training stops after exactly ``s`` steps even
mid-epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from . import layers as L
from .arch import Network
from .data import Dataset
from .errors import EstimateUnavailableError, NumericError, PreconditionError
from .metrics import QUADRATIC, Loss, get_loss

DIVERGENCE_LIMIT = 1e6
_ACT_CODES = {"sigmoid": 1, "tanh": 2, "relu": 3}


@dataclass
class HyperParams:
    batch: Dataset
    eta: float
    shuffle_seed: int = 0
    step_cap: int | None = None

    def __post_init__(self):
        if len(self.batch) == 0:
            raise PreconditionError("training batch must be nonempty")
        if not self.eta > 0:
            raise PreconditionError("learning rate must be positive")
        if self.step_cap is not None and self.step_cap < 1:
            raise PreconditionError("step cap must be positive")

    @classmethod
    def from_smoothness(cls, batch: Dataset, L: float, G: float, eps_sgd: float,
                        shuffle_seed: int = 0, step_cap: int | None = None) -> HyperParams:
        return cls(batch, fixed_lr(L, G, eps_sgd), shuffle_seed, step_cap)


@dataclass
class TrainTrace:
    e_hat_per_epoch: list[float] = field(default_factory=list)
    steps_taken: int = 0
    failed: bool = False
    message: str = ""


def derive_seed(master: int, *keys: int) -> int:
    """Independent 32-bit seed for the stream identified by ``keys``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1)[0])


def shuffle_order(n: int, steps: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chunks, total = [], 0
    while total < steps:
        chunks.append(rng.permutation(n))
        total += n
    if not chunks:
        return np.zeros(0, dtype=np.int_)
    return np.concatenate(chunks)[:steps].astype(np.int_)


# -- gradients -----------------------------------------------------------------


def loss_and_grad(network: Network, x, y, loss: Loss = QUADRATIC):
    """``(loss value, gradients)`` for one example; gradients mirror ``network.weights``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (network.input_dim,):
        raise PreconditionError(f"expected an input of length {network.input_dim}")
    h = x[None, :]
    caches = []
    for layer, ws in zip(network.layers, network.weights):
        h, cache = L.forward(layer, h, ws)
        caches.append(cache)
    yhat = h[:, 0]
    if not np.all(np.isfinite(yhat)):
        raise NumericError("non-finite network output")
    value = float(loss(yhat, [y])[0])
    dy = np.zeros_like(h)
    dy[:, 0] = loss.grad(yhat, np.asarray([y], dtype=float))
    grads = [None] * len(network.layers)
    for i in range(len(network.layers) - 1, -1, -1):
        dy, g = L.backward(network.layers[i], dy, caches[i], network.weights[i])
        grads[i] = g
    if not all(np.all(np.isfinite(g)) for gs in grads for g in gs):
        raise NumericError("non-finite gradient")
    return value, grads


def backprop(network: Network, example, loss: Loss | str = QUADRATIC) -> list[list[np.ndarray]]:
    x, y = example
    return loss_and_grad(network, x, y, get_loss(loss))[1]


# -- SGD -------------------------------------------------------------------------


def dense_chain_spec(network: Network):
    """Flat-buffer layout for the kernels, or ``None`` if the net has other layer kinds."""
    kinds, in_dims, out_dims, w_off, b_off = [], [], [], [], []
    pos = 0
    for layer, ws in zip(network.layers, network.weights):
        if layer.kind == "dense":
            kinds.append(0)
            w_off.append(pos)
            pos += ws[0].size
            if layer.has_bias:
                b_off.append(pos)
                pos += ws[1].size
            else:
                b_off.append(-1)
        elif layer.kind == "activation":
            kinds.append(_ACT_CODES[layer.fn])
            w_off.append(-1)
            b_off.append(-1)
        else:
            return None
        in_dims.append(layer.in_dim)
        out_dims.append(layer.out_dim)
    as_int = lambda v: np.asarray(v, dtype=np.intc)
    as_long = lambda v: np.asarray(v, dtype=np.int_)
    return as_int(kinds), as_int(in_dims), as_int(out_dims), as_long(w_off), as_long(b_off)


def _epoch_means(step_loss: np.ndarray, n: int) -> list[float]:
    return [float(np.mean(step_loss[i:i + n])) for i in range(0, len(step_loss), n)]


def sgd_shuffling_train(network: Network, theta: HyperParams, s: int,
                        loss: Loss | str = QUADRATIC, backend: str | None = None):
    """Train ``network`` in place for ``min(s, step_cap)`` steps.

    Returns ``(network, trace)``.  A non-finite loss or weight, or an epoch
    mean loss above ``DIVERGENCE_LIMIT``, marks the trace as failed.
    """
    if s < 0:
        raise PreconditionError("step count must be non-negative")
    loss = get_loss(loss)
    batch = theta.batch
    if batch.dim != network.input_dim:
        raise PreconditionError(f"batch width {batch.dim} != network input {network.input_dim}")
    steps = s if theta.step_cap is None else min(s, theta.step_cap)
    order = shuffle_order(len(batch), steps, theta.shuffle_seed)
    trace = TrainTrace()
    if steps == 0:
        return network, trace

    spec = dense_chain_spec(network) if loss is QUADRATIC else None
    step_loss = np.full(steps, np.nan)
    if spec is not None:
        params = network.flat_weights()
        X = np.ascontiguousarray(batch.X, dtype=float)
        Y = np.ascontiguousarray(batch.y, dtype=float)
        done = kernels.get_backend(backend).sgd_dense_chain(
            params, *spec, X, Y, order, float(theta.eta), step_loss)
        network.set_flat_weights(params)
    else:
        done = _sgd_generic(network, batch, order, theta.eta, loss, step_loss)

    trace.steps_taken = int(done)
    trace.e_hat_per_epoch = _epoch_means(step_loss[:done], len(batch))
    finite = all(np.all(np.isfinite(w)) for ws in network.weights for w in ws)
    if done < steps or not finite:
        trace.failed, trace.message = True, "non-finite loss or weights"
    elif any(v > DIVERGENCE_LIMIT for v in trace.e_hat_per_epoch):
        trace.failed, trace.message = True, "surrogate error diverged"
    return network, trace


def _sgd_generic(network, batch, order, eta, loss, step_loss) -> int:
    done = 0
    for step, k in enumerate(order):
        try:
            value, grads = loss_and_grad(network, batch.X[k], batch.y[k], loss)
        except NumericError:
            break
        step_loss[step] = value
        for ws, gs in zip(network.weights, grads):
            for w, g in zip(ws, gs):
                w -= eta * g
        done = step + 1
    return done


# -- step budgets ----------------------------------------------------------------


def _exact(x) -> Fraction:
    # Decimal literal semantics: 0.01 means one hundredth, not the nearest double.
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def step_budget(L: float, G: float, F0: float, F_inf: float, n: int, eps_sgd: float) -> int:
    """``floor(3 L G (F0 - F_inf) n / eps_sgd^(3/2))`` evaluated exactly."""
    Lf, Gf, epsf = _exact(L), _exact(G), _exact(eps_sgd)
    if Lf <= 0 or Gf <= 0 or epsf <= 0:
        raise PreconditionError("L, G and eps_sgd must be positive")
    gap = _exact(F0) - _exact(F_inf)
    if gap < 0:
        raise PreconditionError("F0 must be at least F_inf")
    if n < 0:
        raise PreconditionError("n must be non-negative")
    # floor(q / sqrt(eps)) with q = 3LG*gap*n/eps, computed as floor(sqrt(q^2/eps)).
    q = 3 * Lf * Gf * gap * n / epsf
    r = q * q / epsf
    a, b = r.numerator, r.denominator
    k = math.isqrt(a // b)
    while (k + 1) ** 2 * b <= a:
        k += 1
    while k * k * b > a:
        k -= 1
    return k


def fixed_lr(L: float, G: float, eps_sgd: float) -> float:
    if L <= 0 or G <= 0 or eps_sgd <= 0:
        raise PreconditionError("L, G and eps_sgd must be positive")
    return math.sqrt(eps_sgd) / (L * G)


# -- smoothness estimates -------------------------------------------------------


@dataclass
class SmoothnessEstimate:
    """Empirical lower estimates of the smoothness constant and gradient bound."""

    L_hat: float
    G_hat: float
    pairs_sampled: int

    def to_dict(self):
        return {"L_hat": self.L_hat, "G_hat": self.G_hat, "pairs_sampled": self.pairs_sampled}


def _flatten(grads) -> np.ndarray:
    parts = [g.ravel() for gs in grads for g in gs]
    return np.concatenate(parts) if parts else np.zeros(0)


def estimate_smoothness(network: Network, batch: Dataset, loss: Loss | str = QUADRATIC,
                        num_pairs: int = 50, seed: int = 0) -> SmoothnessEstimate:
    """Sample example pairs and report max gradient-difference / loss-difference ratios.

    Pairs whose loss difference is below 1e-9 are skipped.  When every pair
    is skipped an :class:`EstimateUnavailableError` is raised; its ``g_hat``
    attribute still carries the gradient-norm estimate.
    """
    loss = get_loss(loss)
    m = len(batch)
    if m < 2:
        raise PreconditionError("smoothness estimation needs at least two examples")
    rng = np.random.default_rng(seed)
    cache: dict[int, tuple[float, np.ndarray]] = {}

    def at(k):
        if k not in cache:
            value, grads = loss_and_grad(network, batch.X[k], batch.y[k], loss)
            cache[k] = (value, _flatten(grads))
        return cache[k]

    L_hat, G_hat, used = 0.0, 0.0, 0
    for _ in range(num_pairs):
        i, j = rng.choice(m, size=2, replace=False)
        li, gi = at(int(i))
        lj, gj = at(int(j))
        G_hat = max(G_hat, float(np.linalg.norm(gi)), float(np.linalg.norm(gj)))
        dl = abs(li - lj)
        if dl < 1e-9:
            continue
        L_hat = max(L_hat, float(np.linalg.norm(gi - gj)) / dl)
        used += 1
    if used == 0:
        err = EstimateUnavailableError("every sampled pair had equal loss")
        err.g_hat = G_hat
        raise err
    return SmoothnessEstimate(L_hat, G_hat, used)
