"""Architecture families, their search spaces, and concrete networks.

A family is an :class:`ArchTemplate`: an ordered list of layer templates whose
dimensions are polynomials in the architectural parameters.  Layers may be
tagged ``A``, ``B`` or ``C``; the ``B`` run is then repeated ``n`` times
where ``n`` is the template's depth variable.

Templates round-trip through a JSON document (see ``docs/template-schema.md``):

.. code-block:: json

    {
      "input_dim": 16,
      "constants": {"p": 16},
      "variables": [
        {"name": "H", "role": "dimension", "domain": [4, 8, 16]},
        {"name": "A", "role": "divisor", "domain": [1, 2, 4]}
      ],
      "constraints": [{"kind": "divides", "left": "A", "right": "H"}],
      "layers": [{"kind": "attention", "in": "p", "out": "H", "heads": "A"}, ...]
    }
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from . import layers as L
from .errors import (
    ConsistencyError,
    InvalidSpaceError,
    NumericError,
    PreconditionError,
    SchemaError,
    SpaceSizeError,
)
from .poly import PolyExpr, evaluate, parse

ROLES = ("dimension", "depth", "divisor", "other")
DEFAULT_SPACE_CAP = 10**6


# -- parameters and search spaces --------------------------------------------


@dataclass(frozen=True)
class ArchParamVar:
    name: str
    role: str = "dimension"
    domain: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.name.isidentifier():
            raise SchemaError(f"invalid variable name {self.name!r}")
        if self.role not in ROLES:
            raise SchemaError(f"variable {self.name}: unknown role {self.role!r}")
        dom = tuple(int(v) for v in self.domain)
        if not dom:
            raise SchemaError(f"variable {self.name}: empty domain")
        if any(v <= 0 for v in dom):
            raise SchemaError(f"variable {self.name}: domain values must be positive")
        if list(dom) != sorted(set(dom)):
            raise SchemaError(f"variable {self.name}: domain must be strictly ascending")
        object.__setattr__(self, "domain", dom)


@dataclass(frozen=True)
class Constraint:
    """``divides``: left divides right.  ``equals``: left == right."""

    kind: str
    left: PolyExpr
    right: PolyExpr

    def __post_init__(self):
        if self.kind not in ("divides", "equals"):
            raise SchemaError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def divides(cls, left, right) -> Constraint:
        return cls("divides", _expr(left), _expr(right))

    @classmethod
    def equals(cls, left, right) -> Constraint:
        return cls("equals", _expr(left), _expr(right))

    def variables(self) -> set[str]:
        return self.left.free_variables() | self.right.free_variables()

    def holds(self, assignment: Mapping[str, int]) -> bool:
        a = evaluate(self.left, assignment, integer=False)
        b = evaluate(self.right, assignment, integer=False)
        if self.kind == "equals":
            return a == b
        if a == 0 or a.denominator != 1 or b.denominator != 1:
            return False
        return b.numerator % a.numerator == 0

    def __str__(self) -> str:
        op = "|" if self.kind == "divides" else "=="
        return f"{self.left} {op} {self.right}"


class ParamAssignment(Mapping):
    """Immutable ordered map from variable name to a positive integer."""

    __slots__ = ("_items", "_index")

    def __init__(self, values: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = values.items() if isinstance(values, Mapping) else values
        self._items = tuple((str(k), int(v)) for k, v in items)
        self._index = dict(self._items)
        if len(self._index) != len(self._items):
            raise SchemaError("duplicate variable in assignment")

    def __getitem__(self, key: str) -> int:
        return self._index[key]

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return hash(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, ParamAssignment):
            return self._items == other._items
        return Mapping.__eq__(self, other)

    def values_tuple(self) -> tuple[int, ...]:
        return tuple(v for _, v in self._items)

    def as_dict(self) -> dict[str, int]:
        return dict(self._items)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self._items)
        return f"ParamAssignment({inner})"


@dataclass(frozen=True)
class SearchSpace:
    variables: tuple[ArchParamVar, ...]
    constraints: tuple[Constraint, ...] = ()
    assignments: tuple[ParamAssignment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "assignments", tuple(
            a if isinstance(a, ParamAssignment) else ParamAssignment(a)
            for a in self.assignments))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError("variable names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable(self, name: str) -> ArchParamVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise SchemaError(f"unknown variable {name!r}")

    def __len__(self) -> int:
        return len(self.assignments)

    def __iter__(self) -> Iterator[ParamAssignment]:
        return iter(self.assignments)

    def with_assignments(self, assignments: Iterable) -> SearchSpace:
        return SearchSpace(self.variables, self.constraints, tuple(assignments))


def enumerate_space(variables: Sequence[ArchParamVar],
                    constraints: Sequence[Constraint] = (),
                    cap: int = DEFAULT_SPACE_CAP) -> SearchSpace:
    """Filtered Cartesian product of the domains, in ascending lexicographic order."""
    names = {v.name for v in variables}
    for c in constraints:
        unknown = c.variables() - names
        if unknown:
            raise SchemaError(f"constraint {c} uses undeclared {sorted(unknown)}")
    size = math.prod(len(v.domain) for v in variables)
    if size > cap:
        raise SpaceSizeError(f"search space product has {size} points (cap {cap})")
    keys = [v.name for v in variables]
    kept = []
    for values in itertools.product(*(v.domain for v in variables)):
        a = ParamAssignment(zip(keys, values))
        if all(c.holds(a) for c in constraints):
            kept.append(a)
    if not kept:
        raise InvalidSpaceError("no assignment satisfies the constraints")
    return SearchSpace(tuple(variables), tuple(constraints), tuple(kept))


# -- templates -----------------------------------------------------------------


def _expr(value, variables: Iterable[str] = ()) -> PolyExpr:
    if isinstance(value, PolyExpr):
        return value
    return parse(value, variables)


@dataclass(frozen=True)
class LayerTemplate:
    """One layer with polynomial dimensions.

    ``rows/inner/cols`` describe a matmul layer (input reshaped to
    rows x inner, multiplied by a trainable inner x cols matrix).  ``heads``
    is the attention head count; the scale layer multiplies by
    ``(factor_num / factor_den) ** factor_power``.
    """

    kind: str
    in_dim: PolyExpr
    out_dim: PolyExpr
    has_bias: bool = False
    fn: str | None = None
    rows: PolyExpr | None = None
    inner: PolyExpr | None = None
    cols: PolyExpr | None = None
    heads: PolyExpr | None = None
    factor_num: PolyExpr | None = None
    factor_den: PolyExpr | None = None
    factor_power: float = 1.0
    segment: str | None = None

    def __post_init__(self):
        if self.kind not in L.KINDS:
            raise SchemaError(f"unsupported layer kind {self.kind!r}")
        if self.kind == "activation" and self.fn not in L.ACTIVATIONS:
            raise SchemaError(f"activation needs fn in {L.ACTIVATIONS}, got {self.fn!r}")
        if self.segment not in (None, "A", "B", "C"):
            raise SchemaError(f"segment tag must be A, B or C, not {self.segment!r}")

    def polys(self) -> list[PolyExpr]:
        out = [self.in_dim, self.out_dim]
        for p in (self.rows, self.inner, self.cols, self.heads, self.factor_num, self.factor_den):
            if p is not None:
                out.append(p)
        return out

    def free_variables(self) -> set[str]:
        return set().union(*(p.free_variables() for p in self.polys()))

    def weight_shapes(self) -> list[tuple[PolyExpr, ...]]:
        if self.kind == "dense":
            shapes = [(self.out_dim, self.in_dim)]
            return shapes + [(self.out_dim,)] if self.has_bias else shapes
        if self.kind == "matmul":
            return [(self.inner, self.cols)]
        if self.kind == "attention":
            block = [(self.out_dim, self.in_dim), (self.out_dim,)] if self.has_bias \
                else [(self.out_dim, self.in_dim)]
            return block * 3
        return []

    def map_polys(self, fn) -> LayerTemplate:
        changes = {}
        for name in ("in_dim", "out_dim", "rows", "inner", "cols", "heads",
                     "factor_num", "factor_den"):
            value = getattr(self, name)
            if value is not None:
                changes[name] = fn(value)
        return replace(self, **changes)

    def with_segment(self, segment: str | None) -> LayerTemplate:
        return replace(self, segment=segment)

    def resolve(self, assignment: Mapping[str, int]) -> L.ConcreteLayer:
        def ev(p):
            return evaluate(p, assignment)

        factor = 1.0
        if self.kind == "attention":
            # keys/queries are scaled by 1/sqrt(H/A)
            factor = (ev(self.out_dim) / ev(self.heads)) ** -0.5
        elif self.kind == "scale":
            num = evaluate(self.factor_num, assignment, integer=False)
            den = evaluate(self.factor_den, assignment, integer=False)
            factor = float(Fraction(num, 1) / den) ** self.factor_power
        return L.ConcreteLayer(
            kind=self.kind,
            in_dim=ev(self.in_dim),
            out_dim=ev(self.out_dim),
            has_bias=self.has_bias,
            fn=self.fn,
            rows=ev(self.rows) if self.rows is not None else 1,
            inner=ev(self.inner) if self.inner is not None else 0,
            cols=ev(self.cols) if self.cols is not None else 0,
            factor=factor,
        )

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "dense":
            d.update({"in": str(self.in_dim), "out": str(self.out_dim), "bias": self.has_bias})
        elif self.kind == "matmul":
            d.update({"rows": str(self.rows), "inner": str(self.inner), "cols": str(self.cols)})
        elif self.kind == "attention":
            d.update({"in": str(self.in_dim), "out": str(self.out_dim),
                      "heads": str(self.heads), "bias": self.has_bias})
        elif self.kind == "scale":
            d.update({"dim": str(self.in_dim), "factor": {
                "num": str(self.factor_num), "den": str(self.factor_den),
                "power": self.factor_power}})
        else:
            d["dim"] = str(self.in_dim)
            if self.fn:
                d["fn"] = self.fn
        if self.segment:
            d["segment"] = self.segment
        return d


# Factories keep layer construction terse in code and tests.

def dense(in_dim, out_dim, bias: bool = True, segment=None) -> LayerTemplate:
    return LayerTemplate("dense", _expr(in_dim), _expr(out_dim), has_bias=bias, segment=segment)


def activation(fn: str, dim, segment=None) -> LayerTemplate:
    d = _expr(dim)
    return LayerTemplate("activation", d, d, fn=fn, segment=segment)


def softmax(dim, segment=None) -> LayerTemplate:
    d = _expr(dim)
    return LayerTemplate("softmax", d, d, segment=segment)


def scale(dim, num=1, den=1, power: float = 1.0, segment=None) -> LayerTemplate:
    d = _expr(dim)
    return LayerTemplate("scale", d, d, factor_num=_expr(num), factor_den=_expr(den),
                         factor_power=float(power), segment=segment)


def matmul(rows, inner, cols, segment=None) -> LayerTemplate:
    r, i, c = _expr(rows), _expr(inner), _expr(cols)
    return LayerTemplate("matmul", r * i, r * c, rows=r, inner=i, cols=c, segment=segment)


def attention(in_dim, hidden, heads, bias: bool = True, segment=None) -> LayerTemplate:
    return LayerTemplate("attention", _expr(in_dim), _expr(hidden), has_bias=bias,
                         heads=_expr(heads), segment=segment)


def layer_from_dict(d: Mapping[str, Any]) -> LayerTemplate:
    kind = d.get("kind")
    seg = d.get("segment")
    try:
        if kind == "dense":
            return dense(d["in"], d["out"], bool(d.get("bias", True)), seg)
        if kind == "activation":
            return activation(d["fn"], d["dim"], seg)
        if kind in L.ACTIVATIONS:
            return activation(kind, d["dim"], seg)
        if kind == "softmax":
            return softmax(d["dim"], seg)
        if kind == "scale":
            f = d.get("factor", 1)
            if isinstance(f, Mapping):
                return scale(d["dim"], f.get("num", 1), f.get("den", 1), f.get("power", 1.0), seg)
            frac = Fraction(str(f))
            return scale(d["dim"], frac.numerator, frac.denominator, 1.0, seg)
        if kind == "matmul":
            return matmul(d["rows"], d["inner"], d["cols"], seg)
        if kind == "attention":
            return attention(d["in"], d["out"], d["heads"], bool(d.get("bias", True)), seg)
    except KeyError as exc:
        raise SchemaError(f"layer {dict(d)} lacks field {exc}") from None
    raise SchemaError(f"unsupported layer kind {kind!r}")


@dataclass(frozen=True)
class ArchTemplate:
    """A family ``f(.; .; xi)``: layers whose shapes depend on architectural parameters.

    ``variables`` fixes the precedence used for monomial ordering.  Names in
    ``constants`` (typically the input width ``p``) are substituted into
    every layer expression at construction.
    """

    layers: tuple[LayerTemplate, ...]
    input_dim: int
    variables: tuple[str, ...] = ()
    output_dim: int = 1
    depth_var: str | None = None
    constants: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.output_dim != 1:
            raise SchemaError("only binary outputs (output_dim = 1) are supported")
        if int(self.input_dim) <= 0:
            raise SchemaError("input_dim must be positive")
        consts = dict(self.constants)
        layers = []
        free: list[str] = list(self.variables)
        for layer in self.layers:
            if consts:
                layer = layer.map_polys(lambda p: p.substitute(
                    {k: v for k, v in consts.items() if k in p.variables}))
            for v in sorted(layer.free_variables()):
                if v not in free:
                    free.append(v)
            layers.append(layer)
        if self.depth_var and self.depth_var not in free:
            free.append(self.depth_var)
        order = tuple(free)
        layers = [layer.map_polys(lambda p: p.reorder(order)) for layer in layers]
        object.__setattr__(self, "layers", tuple(layers))
        object.__setattr__(self, "variables", order)
        object.__setattr__(self, "input_dim", int(self.input_dim))
        object.__setattr__(self, "constants", consts)
        self._check_segments()
        self._check_chain()

    @property
    def tagged(self) -> bool:
        return any(layer.segment for layer in self.layers)

    def _check_segments(self):
        if not self.tagged:
            if self.depth_var:
                raise SchemaError("a depth variable needs A/B/C segment tags")
            return
        tags = [layer.segment for layer in self.layers]
        if None in tags:
            raise SchemaError("when segments are used every layer needs a tag")
        runs = [k for k, _ in itertools.groupby(tags)]
        if runs != ["A", "B", "C"]:
            raise SchemaError(f"segments must form one A run, one B run, one C run; got {runs}")
        if not self.depth_var:
            raise SchemaError("segment tags require a depth variable")

    def _check_chain(self):
        seq = list(self.layers)
        for a, b in zip(seq, seq[1:]):
            if a.out_dim != b.in_dim:
                raise SchemaError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if self.tagged:
            block = self.segment("B")
            if block[-1].out_dim != block[0].in_dim:
                raise SchemaError("B block output must match its own input to repeat")

    def segment(self, tag: str) -> list[LayerTemplate]:
        return [layer for layer in self.layers if layer.segment == tag]

    def free_variables(self) -> set[str]:
        out = set().union(*(layer.free_variables() for layer in self.layers)) if self.layers else set()
        if self.depth_var:
            out.add(self.depth_var)
        return out

    def expand(self, assignment: Mapping[str, int]) -> list[LayerTemplate]:
        """The flat layer list at ``assignment`` (B run repeated ``n`` times)."""
        if not self.tagged:
            return list(self.layers)
        n = assignment[self.depth_var]
        if n < 1:
            raise PreconditionError(f"depth {self.depth_var} must be >= 1")
        return self.segment("A") + self.segment("B") * n + self.segment("C")

    def resolve(self, assignment: Mapping[str, int]) -> list[L.ConcreteLayer]:
        missing = self.free_variables() - set(assignment)
        if missing:
            raise PreconditionError(f"assignment lacks {sorted(missing)}")
        return [layer.resolve(assignment) for layer in self.expand(assignment)]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "variable_order": list(self.variables),
            "layers": [layer.to_dict() for layer in self.layers],
        }
        if self.depth_var:
            d["depth_var"] = self.depth_var
        return d


# -- validation ----------------------------------------------------------------


@dataclass
class ValidationReport:
    well_posed: bool
    checked: int
    issues: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"well_posed": self.well_posed, "checked": self.checked, "issues": self.issues}


def _assignment_issues(template: ArchTemplate, space: SearchSpace, a: ParamAssignment) -> list[str]:
    issues = []
    if set(a) != set(space.names):
        return [f"{a}: variables {sorted(a)} differ from declared {sorted(space.names)}"]
    for var in space.variables:
        if a[var.name] not in var.domain:
            issues.append(f"{a}: {var.name}={a[var.name]} outside domain {list(var.domain)}")
    for c in space.constraints:
        if not c.holds(a):
            issues.append(f"{a}: constraint {c} violated")
    try:
        resolved = template.resolve(a)
    except (ConsistencyError, PreconditionError, ZeroDivisionError) as exc:
        return issues + [f"{a}: {exc}"]
    dims_in = [r.in_dim for r in resolved]
    dims_out = [r.out_dim for r in resolved]
    if any(d <= 0 for d in dims_in + dims_out):
        issues.append(f"{a}: non-positive layer dimension")
    first_in = dims_in[0] if resolved else template.output_dim
    last_out = dims_out[-1] if resolved else template.input_dim
    if resolved and first_in != template.input_dim:
        issues.append(f"{a}: first layer expects {first_in} inputs, data has {template.input_dim}")
    if not resolved and template.input_dim != template.output_dim:
        issues.append(f"{a}: empty network cannot map {template.input_dim} -> {template.output_dim}")
    if last_out != template.output_dim:
        issues.append(f"{a}: last layer emits {last_out}, output must be {template.output_dim}")
    for i, (x, y) in enumerate(zip(resolved, resolved[1:])):
        if x.out_dim != y.in_dim:
            issues.append(f"{a}: layer {i} emits {x.out_dim} but layer {i + 1} expects {y.in_dim}")
    return issues


def validate_search_space(template: ArchTemplate, space: SearchSpace) -> ValidationReport:
    """Check well-posedness of every assignment in ``space`` for ``template``."""
    unknown = template.free_variables() - set(space.names)
    if unknown:
        raise SchemaError(f"template uses variables not declared in the space: {sorted(unknown)}")
    for c in space.constraints:
        if c.variables() - set(space.names):
            raise SchemaError(f"constraint {c} uses undeclared variables")
    if not space.assignments:
        raise InvalidSpaceError("search space has no assignments")
    issues = []
    for a in space.assignments:
        issues.extend(_assignment_issues(template, space, a))
    return ValidationReport(not issues, len(space.assignments), issues)


# -- concrete networks ---------------------------------------------------------


@dataclass
class Network:
    """An instantiated architecture.  Training mutates ``weights`` in place."""

    template: ArchTemplate
    assignment: ParamAssignment
    layers: list[L.ConcreteLayer]
    weights: list[list[np.ndarray]]

    @property
    def input_dim(self) -> int:
        return self.template.input_dim

    def num_params(self) -> int:
        return sum(w.size for ws in self.weights for w in ws)

    def copy(self) -> Network:
        return Network(self.template, self.assignment, list(self.layers),
                       [[w.copy() for w in ws] for ws in self.weights])

    def flat_weights(self) -> np.ndarray:
        parts = [w.ravel() for ws in self.weights for w in ws]
        return np.concatenate(parts) if parts else np.zeros(0)

    def set_flat_weights(self, flat: np.ndarray) -> None:
        pos = 0
        for ws in self.weights:
            for w in ws:
                w[...] = flat[pos:pos + w.size].reshape(w.shape)
                pos += w.size
        if pos != flat.size:
            raise PreconditionError(f"expected {pos} weights, got {flat.size}")


def _check_instantiable(template: ArchTemplate, assignment: Mapping[str, int]) -> list[L.ConcreteLayer]:
    try:
        resolved = template.resolve(assignment)
    except ConsistencyError as exc:
        raise PreconditionError(str(exc)) from None
    if not resolved:
        raise PreconditionError("cannot instantiate a template with no layers")
    if resolved[0].in_dim != template.input_dim:
        raise PreconditionError("first layer does not accept the input dimension")
    if resolved[-1].out_dim != template.output_dim:
        raise PreconditionError("last layer does not produce the output dimension")
    if resolved[-1].kind != "activation" or resolved[-1].fn != "sigmoid":
        raise PreconditionError("the final layer must be a sigmoid activation (binary output)")
    for a, b in zip(resolved, resolved[1:]):
        if a.out_dim != b.in_dim or a.out_dim <= 0:
            raise PreconditionError("layer dimensions do not chain")
    return resolved


def instantiate(template: ArchTemplate, assignment: Mapping[str, int],
                init_scheme: str = "uniform", seed: int = 0) -> Network:
    """Allocate and initialize weights; uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) by default."""
    resolved = _check_instantiable(template, assignment)
    rng = np.random.default_rng(seed)
    weights = []
    for layer in resolved:
        ws = []
        r = 1.0 / math.sqrt(layer.fan_in()) if layer.fan_in() else 0.0
        for shape in layer.weight_shapes():
            if init_scheme == "uniform":
                ws.append(rng.uniform(-r, r, size=shape))
            elif init_scheme == "zeros":
                ws.append(np.zeros(shape))
            else:
                raise SchemaError(f"unknown init scheme {init_scheme!r}")
        weights.append(ws)
    if not isinstance(assignment, ParamAssignment):
        assignment = ParamAssignment(assignment)
    return Network(template, assignment, resolved, weights)


def forward_batch(network: Network, X: np.ndarray) -> np.ndarray:
    """Outputs for every row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != network.input_dim:
        raise PreconditionError(f"expected inputs of width {network.input_dim}, got shape {X.shape}")
    h = X
    for layer, ws in zip(network.layers, network.weights):
        h, _ = L.forward(layer, h, ws)
    if not np.all(np.isfinite(h)):
        raise NumericError("non-finite network output")
    return h[:, 0]


def forward(network: Network, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != network.input_dim:
        raise PreconditionError(f"expected a vector of length {network.input_dim}")
    h = x[None, :]
    with np.errstate(over="raise", invalid="raise"):
        try:
            for layer, ws in zip(network.layers, network.weights):
                h, _ = L.forward(layer, h, ws)
        except FloatingPointError as exc:
            raise NumericError(f"non-finite intermediate value: {exc}") from None
    if not np.all(np.isfinite(h)):
        raise NumericError("non-finite network output")
    return float(h[0, 0])


def predict(network: Network, X: np.ndarray) -> np.ndarray:
    """Class labels: 1 iff the output is at least 0.5 (ties go to 1)."""
    return (forward_batch(network, X) >= 0.5).astype(int)


# -- JSON documents --------------------------------------------------------------


def load_template_document(doc: Mapping[str, Any], cap: int = DEFAULT_SPACE_CAP):
    """Build ``(template, space)`` from a template document."""
    try:
        variables = [ArchParamVar(v["name"], v.get("role", "dimension"), tuple(v["domain"]))
                     for v in doc["variables"]]
        layers_doc = doc["layers"]
        input_dim = int(doc["input_dim"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"template document lacks field {exc}") from None
    names = [v.name for v in variables]
    constants = {str(k): int(v) for k, v in doc.get("constants", {}).items()}
    template = ArchTemplate(
        layers=tuple(layer_from_dict(d) for d in layers_doc),
        input_dim=input_dim,
        variables=tuple(names),
        output_dim=int(doc.get("output_dim", 1)),
        depth_var=doc.get("depth_var"),
        constants=constants,
    )
    constraints = []
    for c in doc.get("constraints", []):
        try:
            constraints.append(Constraint(c["kind"], _expr(c["left"]), _expr(c["right"])))
        except KeyError as exc:
            raise SchemaError(f"constraint {c} lacks field {exc}") from None
    unknown = template.free_variables() - set(names)
    if unknown:
        raise SchemaError(f"template uses undeclared variables {sorted(unknown)}")
    if "assignments" in doc:
        space = SearchSpace(tuple(variables), tuple(constraints),
                            tuple(ParamAssignment((n, a[n]) for n in names) for a in doc["assignments"]))
    else:
        space = enumerate_space(variables, constraints, cap=cap)
    return template, space


def space_to_dict(space: SearchSpace) -> dict[str, Any]:
    return {
        "variables": [{"name": v.name, "role": v.role, "domain": list(v.domain)}
                      for v in space.variables],
        "constraints": [{"kind": c.kind, "left": str(c.left), "right": str(c.right)}
                        for c in space.constraints],
    }
