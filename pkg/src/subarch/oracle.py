"""Reference machinery for testing the extractor.

* :func:`brute_force_ose_dec` decides the thresholded decision problem by
  scanning every assignment and every weight vector on a finite grid.  No
  training happens; each weight vector is evaluated directly.
* :func:`exhaustive_opt` trains every assignment (stride 1) and returns the
  sorted-order index of the best W-coefficient.
* :func:`reduce_nn_training` maps "can this fixed network reach error k on
  the grid?" onto a decision instance.
* :func:`equal_error_shortest_path` picks the assignment minimizing p + i_hat
  through a shortest-path search over a chain graph.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import networkx as nx
import numpy as np

from . import kernels
from .arch import ArchTemplate, ParamAssignment, SearchSpace, forward_batch, instantiate
from .data import Dataset
from .errors import ExtractionFailedError, PreconditionError, SchemaError, SpaceSizeError
from .extractor import CandidateRecord, evaluate_candidate, find_max_point, sort_space
from .metrics import QUADRATIC, Loss, get_loss, param_size_poly, surrogate_inference_poly
from .poly import evaluate
from .trainer import HyperParams, dense_chain_spec

UNBOUNDED = math.inf
DEFAULT_EVAL_CAP = 10**7


@dataclass(frozen=True)
class WeightGrid:
    levels: tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0)

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels)
        if not levels:
            raise SchemaError("weight grid must be nonempty")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise SchemaError("weight grid must be strictly ascending")
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)


@dataclass
class OseDecInstance:
    template: ArchTemplate
    dataset: Dataset
    weight_grid: WeightGrid
    space: SearchSpace | Sequence[ParamAssignment]
    thetas: list[HyperParams] = field(default_factory=list)
    k_p: float = UNBOUNDED
    k_i: float = UNBOUNDED
    k_e: float = 1.0

    def __post_init__(self):
        for name in ("k_p", "k_i", "k_e"):
            if getattr(self, name) < 0:
                raise PreconditionError(f"{name} must be non-negative")


@dataclass
class OseDecAnswer:
    yes: bool
    assignment: ParamAssignment | None = None
    weights: np.ndarray | None = None
    p: int | None = None
    i_hat: int | None = None
    e: float | None = None
    evaluations: int = 0

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"answer": "yes" if self.yes else "no", "evaluations": self.evaluations}
        if self.yes:
            d.update(assignment=self.assignment.as_dict(), weights=self.weights.tolist(),
                     p=self.p, i_hat=self.i_hat, e=self.e)
        return d


def _error_fn(network, dataset: Dataset):
    """Exact misclassification count for a flat weight vector."""
    spec = dense_chain_spec(network)
    y = dataset.y
    if spec is not None:
        X = np.ascontiguousarray(dataset.X, dtype=float)
        fwd = kernels.forward_dense_chain

        def count(flat):
            return int(np.count_nonzero((fwd(flat, *spec, X) >= 0.5).astype(int) != y))
    else:
        def count(flat):
            network.set_flat_weights(flat)
            return int(np.count_nonzero((forward_batch(network, dataset.X) >= 0.5).astype(int) != y))
    return count


def brute_force_ose_dec(instance: OseDecInstance, cap: int = DEFAULT_EVAL_CAP) -> OseDecAnswer:
    """Decide the instance by direct enumeration; the witness is the first found.

    Assignments are scanned in space order and weight vectors in
    lexicographic grid order.  Hyperparameter sets play no role.
    """
    t = instance.template
    p_poly, i_poly = param_size_poly(t), surrogate_inference_poly(t)
    grid = np.asarray(instance.weight_grid.levels)
    admissible = []
    total = 0
    for a in instance.space:
        p, i = evaluate(p_poly, a), evaluate(i_poly, a)
        if p <= instance.k_p and i <= instance.k_i:
            admissible.append((a, p, i))
            total += len(grid) ** p
            if total > cap:
                raise SpaceSizeError(f"more than {cap} weight evaluations required")
    m = len(instance.dataset)
    evaluations = 0
    for a, p, i in admissible:
        net = instantiate(t, a, init_scheme="zeros")
        count = _error_fn(net, instance.dataset)
        for combo in itertools.product(range(len(grid)), repeat=p):
            flat = grid[list(combo)] if p else np.zeros(0)
            evaluations += 1
            wrong = count(flat)
            if Fraction(wrong, m) <= instance.k_e:
                return OseDecAnswer(True, a, flat.copy(), p, i, wrong / m, evaluations)
    return OseDecAnswer(False, evaluations=evaluations)


def exhaustive_opt(template: ArchTemplate, dataset: Dataset, space: SearchSpace | Sequence,
                   thetas: Sequence[HyperParams], s: int, loss: Loss | str = QUADRATIC,
                   master_seed: int = 0) -> tuple[int, CandidateRecord]:
    """Train every assignment under every theta; return ``(sorted index, best record)``."""
    loss = get_loss(loss)
    assignments = list(space)
    if not assignments:
        raise PreconditionError("empty search space")
    if s <= 0:
        raise PreconditionError("s must be positive")
    maxpoint = find_max_point(template, assignments)
    p_poly, i_poly = param_size_poly(template), surrogate_inference_poly(template)
    ordered = sort_space(assignments, p_poly, i_poly)
    best: CandidateRecord | None = None
    records = []
    for ti, theta in enumerate(thetas):
        for idx, a in enumerate(ordered):
            rec, _ = evaluate_candidate(template, dataset, theta, ti, idx, a, s, loss, master_seed,
                                        maxpoint, p_poly, i_poly)
            records.append(rec)
            if rec.ok and (best is None or rec.w > best.w):
                best = rec
    if best is None:
        raise ExtractionFailedError("every candidate failed to train", records)
    return best.xi_index, best


def reduce_nn_training(template: ArchTemplate, space: SearchSpace | Sequence, dataset: Dataset,
                       weight_grid: WeightGrid, k: float) -> OseDecInstance:
    """Decision instance equivalent to grid training of one fixed architecture."""
    assignments = list(space)
    if len(assignments) != 1:
        raise PreconditionError(f"reduction needs a single assignment, got {len(assignments)}")
    return OseDecInstance(template, dataset, weight_grid, assignments, [], UNBOUNDED, UNBOUNDED, k)


# -- equal-error special case ----------------------------------------------------


def build_shortest_path_graph(template: ArchTemplate, assignments: Sequence[ParamAssignment]):
    """Chain graph: source -> one vertex per variable of each assignment -> target.

    Returns ``(graph, tails, weights)`` where ``tails[i]`` is the last vertex of
    chain ``i`` and ``weights[i] = p + i_hat`` of assignment ``i``.
    """
    p_poly, i_poly = param_size_poly(template), surrogate_inference_poly(template)
    g = nx.DiGraph()
    g.add_node("s")
    g.add_node("t")
    tails, weights = [], []
    for i, a in enumerate(assignments):
        names = list(a)
        if not names:
            raise PreconditionError("assignments must have at least one variable")
        prev = "s"
        for j in range(len(names)):
            g.add_edge(prev, (i, j), weight=0)
            prev = (i, j)
        w = evaluate(p_poly, a) + evaluate(i_poly, a)
        g.add_edge(prev, "t", weight=w)
        tails.append(prev)
        weights.append(w)
    return g, tails, weights


def equal_error_shortest_path(template: ArchTemplate, space: SearchSpace | Sequence) -> ParamAssignment:
    assignments = list(space)
    if not assignments:
        raise PreconditionError("empty search space")
    g, tails, weights = build_shortest_path_graph(template, assignments)
    dist = nx.single_source_dijkstra_path_length(g, "s")
    # The first chain that realizes the shortest distance; deterministic on ties.
    for i, (tail, w) in enumerate(zip(tails, weights)):
        if dist[tail] + w == dist["t"]:
            return assignments[i]
    raise AssertionError("no chain realizes the shortest distance")
