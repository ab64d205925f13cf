"""Weak and strong AB^nC diagnostics and the empirical size/error ordering.

The weak property is certified symbolically: the input segment A and the
output segment C must have strictly smaller degree than the repeated
middle block B in every growth variable, for both the parameter count and
the inference census.  Because every polynomial here has positive
coefficients, strict degree dominance along a variable is the same as being
little-o along that variable.

For the depth variable the comparison is made against the whole B run
(``n`` copies of the block), since a single block never depends on ``n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .arch import ArchTemplate, SearchSpace, instantiate
from .data import Dataset
from .errors import EstimateUnavailableError, NumericError, PreconditionError, SchemaError
from .extractor import concordance, sort_space, train_candidate
from .metrics import (
    QUADRATIC,
    Loss,
    get_loss,
    param_size_poly,
    segment_inference_poly,
    segment_param_poly,
    surrogate_error,
    surrogate_inference_poly,
)
from .poly import PolyExpr, evaluate
from .trainer import HyperParams, SmoothnessEstimate, derive_seed, estimate_smoothness

log = logging.getLogger(__name__)

MAX_STRONG_SAMPLES = 5


@dataclass(frozen=True)
class DegreeComparison:
    objective: str  # "p" or "i_hat"
    variable: str
    segment: str  # "A" or "C"
    outer_degree: int
    block_degree: int

    @property
    def holds(self) -> bool:
        return self.outer_degree < self.block_degree

    def to_dict(self) -> dict[str, Any]:
        return {"objective": self.objective, "variable": self.variable, "segment": self.segment,
                "outer_degree": self.outer_degree, "block_degree": self.block_degree,
                "holds": self.holds}


@dataclass
class WeakResult:
    holds: bool
    growth_vars: tuple[str, ...]
    comparisons: list[DegreeComparison]

    def to_dict(self) -> dict[str, Any]:
        return {"holds": self.holds, "growth_vars": list(self.growth_vars),
                "comparisons": [c.to_dict() for c in self.comparisons]}


def _block_polys(template: ArchTemplate):
    v = template.variables
    n = PolyExpr.var(template.depth_var, v)
    return {
        "p": (segment_param_poly(template, "A"), segment_param_poly(template, "B"),
              segment_param_poly(template, "C")),
        "i_hat": (segment_inference_poly(template, "A"), segment_inference_poly(template, "B"),
                  segment_inference_poly(template, "C")),
    }, n


def check_weak(template: ArchTemplate, growth_vars: Sequence[str]) -> WeakResult:
    """Strict per-variable degree dominance of B over A and C, for p and i_hat."""
    if not template.tagged:
        raise SchemaError("template has no A/B/C segment tags")
    if not template.segment("B"):
        raise SchemaError("template has no B segment")
    growth_vars = tuple(growth_vars)
    if not growth_vars:
        raise PreconditionError("at least one growth variable is required")
    unknown = set(growth_vars) - set(template.variables)
    if unknown:
        raise SchemaError(f"unknown growth variables {sorted(unknown)}")
    polys, n = _block_polys(template)
    comparisons = []
    for objective, (a, b, c) in polys.items():
        for var in growth_vars:
            block = b * n if var == template.depth_var else b
            bd = block.degree(var) if not block.is_zero() else -1
            for tag, outer in (("A", a), ("C", c)):
                od = outer.degree(var) if not outer.is_zero() else -1
                comparisons.append(DegreeComparison(objective, var, tag, od, bd))
    return WeakResult(all(c.holds for c in comparisons), growth_vars, comparisons)


@dataclass
class AbncReport:
    weak: WeakResult
    strong_estimate: SmoothnessEstimate | None = None
    strong_consistent: bool | None = None
    ordering_concordance: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def weak_holds(self) -> bool:
        return self.weak.holds

    def to_dict(self) -> dict[str, Any]:
        return {
            "weak_holds": self.weak.holds,
            "weak": self.weak.to_dict(),
            "strong_estimate": None if self.strong_estimate is None else self.strong_estimate.to_dict(),
            "strong_consistent": self.strong_consistent,
            "ordering_concordance": self.ordering_concordance,
            "notes": list(self.notes),
        }


def _sample(assignments, k: int, seed: int):
    if len(assignments) <= k:
        return list(assignments)
    rng = np.random.default_rng(seed)
    picks = sorted(rng.choice(len(assignments), size=k, replace=False))
    return [assignments[int(i)] for i in picks]


def check_strong(template: ArchTemplate, space: SearchSpace | Sequence, growth_vars: Sequence[str],
                 dataset: Dataset, loss: Loss | str = QUADRATIC, theta: HyperParams | None = None,
                 seed: int = 0, num_pairs: int = 50) -> AbncReport:
    """Weak check, then smoothness estimates on up to five sampled assignments.

    Samples whose estimate is unavailable (every sampled pair has the same
    loss, as for a constant network) are skipped with a note.
    """
    loss = get_loss(loss)
    report = AbncReport(check_weak(template, growth_vars))
    if not report.weak.holds:
        report.notes.append("weak property fails; strong check skipped")
        return report
    batch = theta.batch if theta is not None else dataset
    L_hat, G_hat, pairs = 0.0, 0.0, 0
    for k, a in enumerate(_sample(list(space), MAX_STRONG_SAMPLES, seed)):
        net = instantiate(template, a, seed=derive_seed(seed, k))
        try:
            est = estimate_smoothness(net, batch, loss, num_pairs=num_pairs, seed=derive_seed(seed, k, 1))
        except EstimateUnavailableError:
            report.notes.append(f"sample {a.as_dict()} skipped: degenerate (constant loss)")
            continue
        L_hat, G_hat = max(L_hat, est.L_hat), max(G_hat, est.G_hat)
        pairs += est.pairs_sampled
    if pairs == 0:
        report.notes.append("no usable sample; strong estimate unavailable")
        return report
    report.strong_estimate = SmoothnessEstimate(L_hat, G_hat, pairs)
    report.strong_consistent = bool(np.isfinite(L_hat) and np.isfinite(G_hat))
    return report


def ordering_runs(template: ArchTemplate, space: SearchSpace | Sequence, theta: HyperParams, s: int,
                  num_seeds: int, loss: Loss | str = QUADRATIC, master_seed: int = 0):
    """Per seed, the ``(p, e_hat)`` of every assignment that trained successfully.

    Seed ``k`` uses master seed ``master_seed + k`` and the same derivation as
    the extractor, so seed 0 reproduces an exhaustive extraction's trace.
    """
    if s <= 0:
        raise PreconditionError("s must be positive")
    if num_seeds < 1:
        raise PreconditionError("need at least one seed")
    loss = get_loss(loss)
    p_poly = param_size_poly(template)
    ordered = sort_space(list(space), p_poly, surrogate_inference_poly(template))
    runs = []
    for k in range(num_seeds):
        ps, es = [], []
        for idx, a in enumerate(ordered):
            net, trace = train_candidate(template, theta, 0, idx, a, s, loss, master_seed + k)
            if trace.failed:
                log.info("ordering run: %s failed to train, excluded", a.as_dict())
                continue
            try:
                es.append(surrogate_error(net, theta.batch, loss))
            except NumericError:
                continue
            ps.append(evaluate(p_poly, a))
        runs.append((ps, es))
    return runs


def check_ordering(template: ArchTemplate, space: SearchSpace | Sequence, dataset: Dataset,
                   theta: HyperParams, s: int, num_seeds: int, loss: Loss | str = QUADRATIC,
                   master_seed: int = 0) -> float:
    """Seed-averaged concordance between parameter count and trained surrogate error.

    The surrogate error is measured on ``theta.batch``; ``dataset`` is the
    population the batch was drawn from and is kept for reporting symmetry.
    """
    runs = ordering_runs(template, space, theta, s, num_seeds, loss, master_seed)
    return float(np.mean([concordance(ps, es) for ps, es in runs]))
