"""Maximum point, W-coefficient and the strided extraction search.

The search sorts the space by the value of the leading monomial of the
parameter-count polynomial, then trains every ``epsilon``-th candidate
(indices 0, epsilon, 2*epsilon, ...) for ``s`` steps under each
hyperparameter set, keeping the first candidate with the largest
W-coefficient.

Candidate seeds depend only on (master seed, hyperparameter index, sorted
index), so a candidate trains identically whatever the stride, the
evaluation order or the number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .arch import ArchTemplate, Network, ParamAssignment, SearchSpace, instantiate
from .data import Dataset
from .errors import (
    ConsistencyError,
    DominationError,
    ExtractionFailedError,
    NumericError,
    PreconditionError,
)
from .metrics import (
    QUADRATIC,
    Loss,
    MetricsReport,
    get_loss,
    metrics_report,
    param_size_poly,
    surrogate_inference_poly,
)
from .poly import PolyExpr, evaluate, leading_term
from .report import config_hash
from .trainer import HyperParams, derive_seed, sgd_shuffling_train

log = logging.getLogger(__name__)

E_HAT_FLOOR = 1e-9
CONCORDANCE_WARN = 0.8


@dataclass(frozen=True)
class MaxPoint:
    assignment: ParamAssignment
    p_T: int
    i_T: int


def find_max_point(template: ArchTemplate, space: SearchSpace | Sequence[ParamAssignment]) -> MaxPoint:
    """Lexicographically largest (p, i_hat) over the space.

    Among equal (p, i_hat) the earliest assignment in ascending value order
    wins.  Raises :class:`DominationError` when that point does not dominate
    every other assignment in both objectives.
    """
    assignments = list(space)
    if not assignments:
        raise PreconditionError("cannot find a maximum point of an empty space")
    p_poly = param_size_poly(template)
    i_poly = surrogate_inference_poly(template)
    scored = [(evaluate(p_poly, a), evaluate(i_poly, a), a) for a in assignments]
    best = min(scored, key=lambda t: (-t[0], -t[1], t[2].values_tuple()))
    for p, i, a in scored:
        if i > best[1]:
            raise DominationError(
                f"no maximum point: {best[2]} has the largest size but {a} needs more operations")
    if best[0] <= 0 or best[1] <= 0:
        raise PreconditionError("maximum point must have positive size and cost")
    return MaxPoint(best[2], best[0], best[1])


def w_coefficient(p_f: int, i_f: int, e_hat_f: float, maxpoint: MaxPoint) -> float:
    """((p_T - p_f)/p_T) * ((i_T - i_f)/i_T) / max(e_hat_f, 1e-9)."""
    if p_f > maxpoint.p_T or i_f > maxpoint.i_T:
        raise DominationError(
            f"candidate (p={p_f}, i={i_f}) exceeds the maximum point "
            f"(p={maxpoint.p_T}, i={maxpoint.i_T})")
    if not 0.0 <= e_hat_f <= 1.0:
        raise PreconditionError(f"surrogate error {e_hat_f} outside [0, 1]")
    size = (maxpoint.p_T - p_f) / maxpoint.p_T
    cost = (maxpoint.i_T - i_f) / maxpoint.i_T
    return size * cost / max(e_hat_f, E_HAT_FLOOR)


def sort_space(assignments: Sequence[ParamAssignment], p_poly: PolyExpr,
               i_poly: PolyExpr | None = None) -> list[ParamAssignment]:
    """Ascending by the leading term of ``p_poly``; ties by p, then i_hat, then values."""
    lead = leading_term(p_poly)

    def key(a):
        i_val = evaluate(i_poly, a) if i_poly is not None else 0
        return (lead.value(a), evaluate(p_poly, a), i_val, a.values_tuple())

    return sorted(assignments, key=key)


@dataclass
class CandidateRecord:
    theta_index: int
    xi_index: int
    assignment: ParamAssignment
    metrics: MetricsReport | None
    w: float
    status: str
    steps_taken: int = 0
    e_hat_per_epoch: list[float] = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict[str, Any]:
        d = {
            "theta_index": self.theta_index,
            "xi_index": self.xi_index,
            "assignment": self.assignment.as_dict(),
            "w": self.w,
            "status": self.status,
            "steps_taken": self.steps_taken,
            "e_hat_per_epoch": self.e_hat_per_epoch,
        }
        if self.metrics is not None:
            m = self.metrics.to_dict()
            d["metrics"] = {k: m[k] for k in ("p", "i_hat", "e_hat", "e", "e_exact")}
        if self.message:
            d["message"] = self.message
        return d


@dataclass
class ExtractionResult:
    best: CandidateRecord
    best_network: Network
    trace: list[CandidateRecord]
    max_point: MaxPoint
    sorted_space: list[ParamAssignment]
    config: dict[str, Any]
    master_seed: int
    p_poly: PolyExpr
    i_poly: PolyExpr

    @property
    def best_weights(self) -> list[list[np.ndarray]]:
        return self.best_network.weights

    @property
    def trained_count(self) -> int:
        return len(self.trace)

    def to_dict(self) -> dict[str, Any]:
        return {
            "best": self.best.to_dict(),
            "max_point": {"assignment": self.max_point.assignment.as_dict(),
                          "p": self.max_point.p_T, "i_hat": self.max_point.i_T},
            "p_poly": str(self.p_poly),
            "i_poly": str(self.i_poly),
            "leading_term": str(leading_term(self.p_poly)),
            "sorted_space": [a.as_dict() for a in self.sorted_space],
            "trained_count": self.trained_count,
            "trace": [r.to_dict() for r in self.trace],
            "master_seed": self.master_seed,
            "config": self.config,
            "config_hash": config_hash(self.config),
        }


def train_candidate(template: ArchTemplate, theta: HyperParams, theta_index: int, xi_index: int,
                    assignment: ParamAssignment, s: int, loss: Loss, master_seed: int):
    """Train the candidate at ``xi_index`` of the sorted space; returns ``(network, trace)``."""
    init_seed = derive_seed(master_seed, theta_index, xi_index, 0)
    shuffle_seed = derive_seed(master_seed, theta_index, xi_index, 1, theta.shuffle_seed)
    net = instantiate(template, assignment, seed=init_seed)
    return sgd_shuffling_train(net, replace(theta, shuffle_seed=shuffle_seed), s, loss)


def evaluate_candidate(template: ArchTemplate, dataset: Dataset, theta: HyperParams,
                       theta_index: int, xi_index: int, assignment: ParamAssignment,
                       s: int, loss: Loss, master_seed: int, maxpoint: MaxPoint,
                       p_poly: PolyExpr, i_poly: PolyExpr) -> tuple[CandidateRecord, Network]:
    """Instantiate, train and score one candidate with its derived seeds."""
    net, trace = train_candidate(template, theta, theta_index, xi_index, assignment, s, loss,
                                 master_seed)
    record = CandidateRecord(theta_index, xi_index, assignment, None, 0.0, "failed",
                             trace.steps_taken, trace.e_hat_per_epoch, trace.message)
    if trace.failed:
        return record, net
    try:
        m = metrics_report(net, theta.batch, dataset, loss, p_poly, i_poly)
    except (NumericError, ArithmeticError) as exc:
        record.message = str(exc)
        return record, net
    record.metrics = m
    record.status = "ok"
    record.w = w_coefficient(m.p, m.i_hat, m.e_hat, maxpoint)
    return record, net


def concordance(p_values: Sequence[int], e_values: Sequence[float], tol: float = 1e-6) -> float:
    """Fraction of ordered pairs with p(f) <= p(g) that have e(f) <= e(g) + tol; 1 if none."""
    total = agree = 0
    for i, (pf, ef) in enumerate(zip(p_values, e_values)):
        for j, (pg, eg) in enumerate(zip(p_values, e_values)):
            if i == j or pf > pg:
                continue
            total += 1
            agree += ef <= eg + tol
    return 1.0 if total == 0 else agree / total


def trace_concordance(records: Sequence[CandidateRecord], tol: float = 1e-6) -> float:
    ok = [r for r in records if r.ok]
    return concordance([r.metrics.p for r in ok], [r.metrics.e_hat for r in ok], tol)


def pareto_violations(best: CandidateRecord, records: Sequence[CandidateRecord]) -> list[CandidateRecord]:
    """Ok records that strictly dominate ``best`` in (p, i_hat, floored e_hat)."""
    if not best.ok or best.w <= 0:
        return []
    b = best.metrics
    be = max(b.e_hat, E_HAT_FLOOR)
    out = []
    for r in records:
        if not r.ok or r is best:
            continue
        m = r.metrics
        re = max(m.e_hat, E_HAT_FLOOR)
        if m.p <= b.p and m.i_hat <= b.i_hat and re <= be and (m.p, m.i_hat, re) != (b.p, b.i_hat, be):
            out.append(r)
    return out


def candidate_indices(n: int, epsilon: int) -> list[int]:
    return list(range(0, n, epsilon))


def extract(template: ArchTemplate, dataset: Dataset, space: SearchSpace,
            thetas: Sequence[HyperParams], epsilon: int, s: int,
            loss: Loss | str = QUADRATIC, master_seed: int = 0, jobs: int = 1,
            config: dict[str, Any] | None = None) -> ExtractionResult:
    """Strided W-coefficient search; returns the first recorded argmax."""
    loss = get_loss(loss)
    assignments = list(space)
    n = len(assignments)
    if n == 0:
        raise PreconditionError("empty search space")
    if not 1 <= epsilon <= n:
        raise PreconditionError(f"epsilon must lie in [1, {n}], got {epsilon}")
    if s <= 0:
        raise PreconditionError("s must be positive")
    if not thetas:
        raise PreconditionError("at least one hyperparameter set is required")

    maxpoint = find_max_point(template, assignments)
    p_poly = param_size_poly(template)
    i_poly = surrogate_inference_poly(template)
    ordered = sort_space(assignments, p_poly, i_poly)

    jobs_list = [(ti, xi) for ti in range(len(thetas)) for xi in candidate_indices(n, epsilon)]

    def run(job):
        ti, xi = job
        return evaluate_candidate(template, dataset, thetas[ti], ti, xi, ordered[xi], s, loss,
                                  master_seed, maxpoint, p_poly, i_poly)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, jobs_list))
    else:
        results = [run(job) for job in jobs_list]

    # Reduce in (theta, candidate) order so the first argmax is schedule-independent.
    trace = [r for r, _ in results]
    best_k = None
    for k, rec in enumerate(trace):
        if not rec.ok:
            continue
        if best_k is None or rec.w > trace[best_k].w:
            best_k = k
    if best_k is None:
        raise ExtractionFailedError("every candidate failed to train", trace)
    best = trace[best_k]

    violators = pareto_violations(best, trace)
    if violators:
        raise ConsistencyError(f"best candidate is dominated by {violators[0].assignment}")
    for ti in range(len(thetas)):
        c = trace_concordance([r for r in trace if r.theta_index == ti])
        if c < CONCORDANCE_WARN:
            log.warning("size/error ordering concordance %.3f < %.1f under theta %d; "
                        "the stride error bound may not apply", c, CONCORDANCE_WARN, ti)

    return ExtractionResult(best, results[best_k][1], trace, maxpoint, ordered,
                            dict(config or {}), master_seed, p_poly, i_poly)


def expected_candidate_count(n: int, epsilon: int, num_thetas: int) -> int:
    return math.ceil(n / epsilon) * num_thetas
