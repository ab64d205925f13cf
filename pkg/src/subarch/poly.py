"""Canonical multivariate polynomials with positive rational coefficients.

Polynomials here describe quantities that depend on architectural
parameters: weight counts, operation counts, layer widths.  Every such
quantity is a sum of counts, so coefficients are kept strictly positive and
subtraction only exists inside the string parser (where the final result
must still come out positive).

Monomials are ordered graded-lexicographically.  The variable precedence is
carried by each polynomial (``PolyExpr.variables``) and is normally the
declaration order of the template's variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

from .errors import ConsistencyError, PreconditionError, SchemaError

__all__ = [
    "Monomial",
    "PolyExpr",
    "add",
    "mul",
    "leading_term",
    "evaluate",
    "parse",
]


@dataclass(frozen=True)
class Monomial:
    coefficient: Fraction
    exponents: tuple[tuple[str, int], ...]

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.exponents)

    def exponent(self, name: str) -> int:
        for var, e in self.exponents:
            if var == name:
                return e
        return 0

    def value(self, assignment: Mapping[str, int]) -> Fraction:
        out = Fraction(self.coefficient)
        for var, e in self.exponents:
            out *= Fraction(assignment[var]) ** e
        return out

    def __str__(self) -> str:
        return _format_term(self.coefficient, self.exponents)


def _format_term(coeff: Fraction, exps: Iterable[tuple[str, int]]) -> str:
    factors = [v if e == 1 else f"{v}^{e}" for v, e in exps]
    if not factors:
        return str(coeff)
    if coeff != 1:
        factors.insert(0, str(coeff))
    return "*".join(factors)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot use {value!r} as a polynomial coefficient")


class PolyExpr:
    """Immutable polynomial in canonical form.

    ``terms`` maps exponent vectors (aligned with ``variables``) to
    coefficients.  Zero coefficients never appear; the zero polynomial has
    no terms.
    """

    __slots__ = ("variables", "_terms", "_hash")

    def __init__(self, terms: Mapping[tuple[int, ...], Fraction] | None = None,
                 variables: Iterable[str] = ()):
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise SchemaError(f"duplicate variable in order {self.variables}")
        n = len(self.variables)
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or any(e < 0 for e in exps):
                raise SchemaError(f"bad exponent vector {exps} for {self.variables}")
            c = _as_fraction(c)
            if c < 0:
                raise SchemaError("polynomial coefficients must be positive")
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
        self._terms = clean
        self._hash = None

    # -- constructors -----------------------------------------------------

    @classmethod
    def const(cls, value, variables: Iterable[str] = ()) -> PolyExpr:
        variables = tuple(variables)
        return cls({(0,) * len(variables): _as_fraction(value)}, variables)

    @classmethod
    def var(cls, name: str, variables: Iterable[str] | None = None) -> PolyExpr:
        variables = tuple(variables) if variables is not None else (name,)
        if name not in variables:
            variables = variables + (name,)
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls({exps: Fraction(1)}, variables)

    @classmethod
    def zero(cls, variables: Iterable[str] = ()) -> PolyExpr:
        return cls({}, variables)

    # -- structure --------------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def free_variables(self) -> set[str]:
        return {v for exps in self._terms for v, e in zip(self.variables, exps) if e}

    def _key(self, exps: tuple[int, ...]):
        return (sum(exps), exps)

    @property
    def monomials(self) -> list[Monomial]:
        """Terms in descending graded-lex order."""
        ordered = sorted(self._terms, key=self._key, reverse=True)
        return [self._monomial(exps) for exps in ordered]

    def _monomial(self, exps: tuple[int, ...]) -> Monomial:
        named = tuple((v, e) for v, e in zip(self.variables, exps) if e)
        return Monomial(self._terms[exps], named)

    def degree(self, name: str | None = None) -> int:
        """Total degree, or the degree in one variable.  Zero for the zero polynomial."""
        if not self._terms:
            return 0
        if name is None:
            return max(sum(exps) for exps in self._terms)
        if name not in self.variables:
            return 0
        i = self.variables.index(name)
        return max(exps[i] for exps in self._terms)

    def reorder(self, variables: Iterable[str]) -> PolyExpr:
        """Same polynomial, new variable precedence (must cover every free variable)."""
        variables = tuple(variables)
        missing = self.free_variables() - set(variables)
        if missing:
            raise SchemaError(f"variable order lacks {sorted(missing)}")
        idx = {v: i for i, v in enumerate(variables)}
        out = {}
        for exps, c in self._terms.items():
            new = [0] * len(variables)
            for v, e in zip(self.variables, exps):
                if e:
                    new[idx[v]] = e
            out[tuple(new)] = c
        return PolyExpr(out, variables)

    def _aligned(self, other: PolyExpr) -> tuple[PolyExpr, PolyExpr]:
        if self.variables == other.variables:
            return self, other
        order = self.variables + tuple(v for v in other.variables if v not in self.variables)
        return self.reorder(order), other.reorder(order)

    def substitute(self, values: Mapping[str, int]) -> PolyExpr:
        """Replace some variables by positive constants; they leave the variable order."""
        keep = tuple(v for v in self.variables if v not in values)
        out: dict[tuple[int, ...], Fraction] = {}
        for exps, c in self._terms.items():
            new = []
            for v, e in zip(self.variables, exps):
                if v in values:
                    c = c * Fraction(values[v]) ** e
                else:
                    new.append(e)
            key = tuple(new)
            out[key] = out.get(key, Fraction(0)) + c
        return PolyExpr(out, keep)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other) -> PolyExpr:
        if not isinstance(other, PolyExpr):
            other = PolyExpr.const(other, self.variables)
        a, b = self._aligned(other)
        out = dict(a._terms)
        for exps, c in b._terms.items():
            out[exps] = out.get(exps, Fraction(0)) + c
        return PolyExpr(out, a.variables)

    __radd__ = __add__

    def __mul__(self, other) -> PolyExpr:
        if not isinstance(other, PolyExpr):
            c = _as_fraction(other)
            if c < 0:
                raise SchemaError("cannot scale a polynomial by a negative number")
            return PolyExpr({e: v * c for e, v in self._terms.items()}, self.variables)
        a, b = self._aligned(other)
        out: dict[tuple[int, ...], Fraction] = {}
        for ea, ca in a._terms.items():
            for eb, cb in b._terms.items():
                key = tuple(x + y for x, y in zip(ea, eb))
                out[key] = out.get(key, Fraction(0)) + ca * cb
        return PolyExpr(out, a.variables)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> PolyExpr:
        if not isinstance(k, int) or k < 0:
            raise SchemaError("exponent must be a non-negative integer")
        out = PolyExpr.const(1, self.variables)
        for _ in range(k):
            out = out * self
        return out

    # -- comparison -------------------------------------------------------

    def _canonical(self) -> frozenset:
        return frozenset(
            (tuple((v, e) for v, e in zip(self.variables, exps) if e), c)
            for exps, c in self._terms.items()
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyExpr):
            if isinstance(other, (int, Fraction)):
                other = PolyExpr.const(other)
            else:
                return NotImplemented
        # Exponent maps are compared by name so variable order is irrelevant.
        mine = {frozenset(m.exponents): m.coefficient for m in self.monomials}
        theirs = {frozenset(m.exponents): m.coefficient for m in other.monomials}
        return mine == theirs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(
                (frozenset(m.exponents), m.coefficient) for m in self.monomials))
        return self._hash

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(str(m) for m in self.monomials)

    def __repr__(self) -> str:
        return f"PolyExpr({str(self)!r}, variables={self.variables})"


def add(a: PolyExpr, b: PolyExpr) -> PolyExpr:
    return a + b


def mul(a: PolyExpr, b: PolyExpr) -> PolyExpr:
    return a * b


def leading_term(p: PolyExpr) -> Monomial:
    """Largest monomial under graded-lex order with ``p.variables`` precedence."""
    if p.is_zero():
        raise PreconditionError("the zero polynomial has no leading term")
    return p.monomials[0]


def evaluate(p: PolyExpr | Monomial, assignment: Mapping[str, int], integer: bool = True):
    """Exact evaluation.

    With ``integer=True`` (the default, used for sizes and operation counts)
    the result must be a whole number and is returned as ``int``; otherwise a
    ``Fraction`` is returned.
    """
    terms = p.monomials if isinstance(p, PolyExpr) else [p]
    total = Fraction(0)
    for m in terms:
        for var, _ in m.exponents:
            if var not in assignment:
                raise SchemaError(f"assignment has no value for variable {var!r}")
        total += m.value(assignment)
    if not integer:
        return total
    if total.denominator != 1:
        raise ConsistencyError(f"{p} evaluates to non-integer {total}")
    return int(total)


# -- parser -------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SchemaError(f"cannot parse expression {text!r} at offset {pos}")
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", num))
        elif name is not None:
            out.append(("name", name))
        else:
            out.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return out


# Signed sparse polynomials keyed by frozenset of (name, exponent); only the
# parser needs them.
def _s_add(a: dict, b: dict, sign: int = 1) -> dict:
    out = dict(a)
    for k, c in b.items():
        out[k] = out.get(k, Fraction(0)) + sign * c
    return {k: c for k, c in out.items() if c}


def _s_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            exps = dict(ka)
            for v, e in kb:
                exps[v] = exps.get(v, 0) + e
            key = frozenset(exps.items())
            out[key] = out.get(key, Fraction(0)) + ca * cb
    return {k: c for k, c in out.items() if c}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.names: list[str] = []

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def fail(self, why: str):
        raise SchemaError(f"cannot parse expression {self.text!r}: {why}")

    def expr(self) -> dict:
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        elif self.peek() == ("op", "+"):
            self.take()
        out = _s_add({}, self.term(), sign)
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            out = _s_add(out, self.term(), 1 if op == "+" else -1)
        return out

    def term(self) -> dict:
        out = self.factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.factor()
            if op == "*":
                out = _s_mul(out, rhs)
            else:
                if any(k for k in rhs) or not rhs:
                    self.fail("division is only allowed by nonzero constants")
                out = {k: c / rhs[frozenset()] for k, c in out.items()}
        return out

    def factor(self) -> dict:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, tok = self.take()
            if kind != "num" or not tok.isdigit():
                self.fail("exponents must be non-negative integers")
            out = {frozenset(): Fraction(1)}
            for _ in range(int(tok)):
                out = _s_mul(out, base)
            return out
        return base

    def atom(self) -> dict:
        kind, tok = self.take()
        if kind == "num":
            return {frozenset(): Fraction(tok)} if Fraction(tok) else {}
        if kind == "name":
            if tok not in self.names:
                self.names.append(tok)
            return {frozenset({(tok, 1)}): Fraction(1)}
        if (kind, tok) == ("op", "("):
            out = self.expr()
            if self.take() != ("op", ")"):
                self.fail("unbalanced parentheses")
            return out
        self.fail(f"unexpected token {tok!r}")


def parse(text: str | int, variables: Iterable[str] | None = None) -> PolyExpr:
    """Parse ``"3*H*p + H^2 + 1"`` style expressions.

    Subtraction is accepted but the simplified result must have positive
    coefficients.  ``variables`` fixes the precedence; names not listed are
    appended in order of first appearance.
    """
    if isinstance(text, int):
        if text < 0:
            raise SchemaError("negative constant")
        return PolyExpr.const(text, variables or ())
    parser = _Parser(str(text))
    if not parser.toks:
        raise SchemaError("empty expression")
    signed = parser.expr()
    if parser.i != len(parser.toks):
        parser.fail(f"trailing input at token {parser.peek()[1]!r}")
    order = tuple(variables or ())
    order = order + tuple(n for n in parser.names if n not in order)
    terms = {}
    for key, c in signed.items():
        if c < 0:
            raise SchemaError(f"expression {text!r} has a negative coefficient")
        exps = dict(key)
        terms[tuple(exps.get(v, 0) for v in order)] = c
    return PolyExpr(terms, order)
