"""Parameter size, surrogate inference cost, error rate and surrogate error.

Inference cost is an operation census: additions and multiplications cost
one each, every other operation costs its length.  Per layer kind:

=========== ============================== ================================
kind        adds / mults                   other operations (length, count)
=========== ============================== ================================
dense x->y  x*y adds, x*y mults            none
activation  none                           (m, 1)
softmax m   m adds                         (m, 1) exponentials, (m, 1) divisions
scale m     none                           (m, 1)
matmul      a*b*c adds, a*b*c mults        none
attention   three dense p->H, two          (H^2, 1) for the score scaling
            H-sized matmuls
=========== ============================== ================================

Additions are counted with an accumulator that starts at zero, so a dense
layer costs ``x*y`` additions with or without a bias and a softmax costs
``m``.  This keeps every census polynomial positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from .arch import ArchTemplate, LayerTemplate, Network, forward_batch
from .data import Dataset
from .errors import LossContractError, PreconditionError, SchemaError
from .layers import ConcreteLayer
from .poly import PolyExpr, evaluate


# -- losses --------------------------------------------------------------------


@dataclass(frozen=True)
class Loss:
    """A smooth [0, 1]-valued loss on a sigmoid output and a 0/1 label."""

    name: str
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, yhat, y):
        out = self.value(np.asarray(yhat, dtype=float), np.asarray(y, dtype=float))
        if np.any(~np.isfinite(out)) or np.any(out < 0.0) or np.any(out > 1.0):
            raise LossContractError(f"loss {self.name} left [0, 1]")
        return out


QUADRATIC = Loss("quadratic", lambda yh, y: (yh - y) ** 2, lambda yh, y: 2.0 * (yh - y))
LOSSES = {"quadratic": QUADRATIC}


def get_loss(name_or_loss) -> Loss:
    if isinstance(name_or_loss, Loss):
        return name_or_loss
    try:
        return LOSSES[name_or_loss]
    except KeyError:
        raise SchemaError(f"unknown loss {name_or_loss!r}; known: {sorted(LOSSES)}") from None


# -- census ----------------------------------------------------------------------


@dataclass
class OpCensus:
    additions: Any
    multiplications: Any
    others: list = field(default_factory=list)

    def total(self):
        out = self.additions + self.multiplications
        for length, count in self.others:
            out = out + length * count
        return out

    def __add__(self, other: OpCensus) -> OpCensus:
        return OpCensus(self.additions + other.additions,
                        self.multiplications + other.multiplications,
                        self.others + other.others)

    def scaled(self, k) -> OpCensus:
        return OpCensus(self.additions * k, self.multiplications * k,
                        [(length, count * k) for length, count in self.others])


def _census(kind: str, x, y, rows=None, inner=None, cols=None, zero=0) -> OpCensus:
    """Census rules, written once for integers and for polynomials alike."""
    if kind == "dense":
        return OpCensus(x * y, x * y)
    if kind == "activation" or kind == "scale":
        return OpCensus(zero, zero, [(x, 1)])
    if kind == "softmax":
        return OpCensus(x, zero, [(x, 1), (x, 1)])
    if kind == "matmul":
        abc = rows * inner * cols
        return OpCensus(abc, abc)
    if kind == "attention":
        h2 = y * y
        projections = 3 * (x * y)
        return OpCensus(projections + 2 * h2, projections + 2 * h2, [(h2, 1)])
    raise SchemaError(f"no census rule for layer kind {kind!r}")


def layer_census(layer: LayerTemplate | ConcreteLayer, variables=()) -> OpCensus:
    if isinstance(layer, ConcreteLayer):
        return _census(layer.kind, layer.in_dim, layer.out_dim,
                       layer.rows, layer.inner, layer.cols, zero=0)
    return _census(layer.kind, layer.in_dim, layer.out_dim, layer.rows, layer.inner,
                   layer.cols, zero=PolyExpr.zero(variables))


def _layer_params_poly(layer: LayerTemplate, variables) -> PolyExpr:
    total = PolyExpr.zero(variables)
    for shape in layer.weight_shapes():
        term = PolyExpr.const(1, variables)
        for d in shape:
            term = term * d
        total = total + term
    return total


def _segments(template: ArchTemplate):
    """Yield ``(layers, multiplier)``; the B block is weighted by the depth variable."""
    if not template.tagged:
        yield list(template.layers), None
        return
    yield template.segment("A"), None
    yield template.segment("B"), PolyExpr.var(template.depth_var, template.variables)
    yield template.segment("C"), None


def segment_param_poly(template: ArchTemplate, tag: str) -> PolyExpr:
    v = template.variables
    return sum((_layer_params_poly(l, v) for l in template.segment(tag)), PolyExpr.zero(v))


def segment_inference_poly(template: ArchTemplate, tag: str) -> PolyExpr:
    v = template.variables
    out = PolyExpr.zero(v)
    for layer in template.segment(tag):
        out = out + layer_census(layer, v).total()
    return out


def param_size_poly(template: ArchTemplate) -> PolyExpr:
    """Polynomial in the architectural parameters counting trainable weights."""
    v = template.variables
    total = PolyExpr.zero(v)
    for layers, mult in _segments(template):
        part = sum((_layer_params_poly(l, v) for l in layers), PolyExpr.zero(v))
        total = total + (part * mult if mult is not None else part)
    return total


def census_poly(template: ArchTemplate) -> OpCensus:
    v = template.variables
    zero = PolyExpr.zero(v)
    total = OpCensus(zero, zero, [])
    for layers, mult in _segments(template):
        for layer in layers:
            c = layer_census(layer, v)
            total = total + (c.scaled(mult) if mult is not None else c)
    return total


def surrogate_inference_poly(template: ArchTemplate) -> PolyExpr:
    return census_poly(template).total() + PolyExpr.zero(template.variables)


def param_size(template: ArchTemplate, assignment) -> int:
    """Direct count over the instantiated shapes (no polynomial involved)."""
    try:
        layers = template.resolve(assignment)
    except Exception as exc:  # resolution failures mean an invalid assignment
        raise PreconditionError(f"invalid assignment {assignment}: {exc}") from None
    total = 0
    for layer in layers:
        for shape in layer.weight_shapes():
            total += int(np.prod(shape, dtype=object))
    return total


def surrogate_inference(template: ArchTemplate, assignment) -> int:
    try:
        layers = template.resolve(assignment)
    except Exception as exc:
        raise PreconditionError(f"invalid assignment {assignment}: {exc}") from None
    return int(sum((layer_census(layer).total() for layer in layers), 0))


# -- errors ----------------------------------------------------------------------


def error_rate(network: Network, dataset: Dataset) -> Fraction:
    """Exact fraction of misclassified points (output >= 0.5 means class 1)."""
    if len(dataset) == 0:
        raise PreconditionError("error rate needs a nonempty dataset")
    if dataset.dim != network.input_dim:
        raise PreconditionError(f"dataset width {dataset.dim} != network input {network.input_dim}")
    labels = (forward_batch(network, dataset.X) >= 0.5).astype(int)
    return Fraction(int(np.count_nonzero(labels != dataset.y)), len(dataset))


def surrogate_error(network: Network, batch: Dataset, loss: Loss | str = QUADRATIC) -> float:
    """Mean loss over ``batch``."""
    loss = get_loss(loss)
    if len(batch) == 0:
        raise PreconditionError("surrogate error needs a nonempty batch")
    if batch.dim != network.input_dim:
        raise PreconditionError(f"batch width {batch.dim} != network input {network.input_dim}")
    values = loss(forward_batch(network, batch.X), batch.y)
    return float(np.mean(values))


@dataclass
class MetricsReport:
    p: int
    i_hat: int
    e_hat: float
    e: Fraction
    p_poly: PolyExpr
    i_poly: PolyExpr

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "i_hat": self.i_hat,
            "e_hat": self.e_hat,
            "e": float(self.e),
            "e_exact": f"{self.e.numerator}/{self.e.denominator}",
            "p_poly": str(self.p_poly),
            "i_poly": str(self.i_poly),
        }


def metrics_report(network: Network, batch: Dataset, dataset: Dataset,
                   loss: Loss | str = QUADRATIC, p_poly=None, i_poly=None) -> MetricsReport:
    t = network.template
    p_poly = p_poly if p_poly is not None else param_size_poly(t)
    i_poly = i_poly if i_poly is not None else surrogate_inference_poly(t)
    return MetricsReport(
        p=evaluate(p_poly, network.assignment),
        i_hat=evaluate(i_poly, network.assignment),
        e_hat=surrogate_error(network, batch, loss),
        e=error_rate(network, dataset),
        p_poly=p_poly,
        i_poly=i_poly,
    )
