from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subarch.errors import ConsistencyError, PreconditionError, SchemaError
from subarch.poly import Monomial, PolyExpr, add, evaluate, leading_term, mul, parse

VARS = ("x", "y", "z")

exponents = st.tuples(*[st.integers(0, 3)] * len(VARS))
coefficients = st.fractions(min_value=Fraction(1, 4), max_value=5, max_denominator=4)
polys = st.dictionaries(exponents, coefficients, max_size=5).map(lambda t: PolyExpr(t, VARS))
points = st.fixed_dictionaries({v: st.integers(0, 6) for v in VARS})


def frac_eval(p, pt):
    return evaluate(p, pt, integer=False)


# -- examples ----------------------------------------------------------------------


def test_mul_examples():
    x = PolyExpr.var("x")
    assert mul(x, x + 1) == parse("x^2 + x")
    assert mul(PolyExpr.const(1), parse("3*H*p + H")) == parse("3*H*p + H")
    hp = mul(PolyExpr.var("H", ("H", "p")), PolyExpr.var("p", ("H", "p")))
    assert len(hp.monomials) == 1 and hp.monomials[0].degree == 2


def test_leading_term_graded_then_lex():
    lt = leading_term(parse("x^2*y + x^3", ("x", "y")))
    assert lt.exponents == (("x", 3),)
    lt = leading_term(parse("3*H*p + 3*H + J*H + J", ("H", "p", "J")))
    assert lt.exponents == (("H", 1), ("p", 1)) and lt.coefficient == 3
    assert leading_term(PolyExpr.const(5)) == Monomial(Fraction(5), ())


def test_leading_term_of_zero_is_an_error():
    with pytest.raises(PreconditionError):
        leading_term(PolyExpr.zero(VARS))


def test_evaluate_examples():
    example = parse("3*H*p + 3*H + J*H + J", ("H", "p", "J"))
    assert evaluate(example, {"H": 2, "p": 3, "J": 1}) == 27
    assert evaluate(PolyExpr.const(1), {"anything": 4}) == 1
    assert evaluate(parse("x^2"), {"x": 0}) == 0


def test_evaluate_missing_variable():
    with pytest.raises(SchemaError):
        evaluate(parse("x*y"), {"x": 1})


def test_evaluate_non_integer_is_flagged():
    half = PolyExpr.var("x") * Fraction(1, 2)
    with pytest.raises(ConsistencyError):
        evaluate(half, {"x": 3})
    assert evaluate(half, {"x": 3}, integer=False) == Fraction(3, 2)


def test_parser_accepts_the_config_syntax():
    assert parse("H*p + H") == parse("p*H + H")
    assert parse("2*(a + 1)^2") == parse("2*a^2 + 4*a + 2")
    assert parse("a**2 - a + a") == parse("a^2")
    assert parse(7) == PolyExpr.const(7)


@pytest.mark.parametrize("bad", ["", "x +", "(x", "x - 2*x", "x $ y", "x y"])
def test_parser_rejects(bad):
    with pytest.raises(SchemaError):
        parse(bad)


def test_negative_coefficients_are_rejected():
    with pytest.raises(SchemaError):
        PolyExpr({(1,): -1}, ("x",))
    with pytest.raises(SchemaError):
        PolyExpr.var("x") * -2


def test_canonical_form_merges_and_drops_zero_terms():
    p = PolyExpr({(1, 0): 2, (0, 1): 0}, ("x", "y"))
    assert p.monomials == [Monomial(Fraction(2), (("x", 1),))]
    assert PolyExpr.zero(VARS).is_zero() and str(PolyExpr.zero()) == "0"


def test_degree_and_free_variables():
    p = parse("x^2*y + z", VARS)
    assert p.degree() == 3 and p.degree("y") == 1 and p.degree("z") == 1
    assert p.free_variables() == {"x", "y", "z"}


def test_substitute_fixes_a_variable():
    p = parse("3*H*p + 3*H", ("H", "p")).substitute({"p": 2})
    assert p == parse("9*H") and p.variables == ("H",)


# -- properties ---------------------------------------------------------------------


@settings(max_examples=200)
@given(polys, polys, polys, points)
def test_ring_laws(a, b, c, pt):
    assert frac_eval(a + b, pt) == frac_eval(b + a, pt)
    assert frac_eval(a * b, pt) == frac_eval(b * a, pt)
    assert frac_eval((a + b) + c, pt) == frac_eval(a + (b + c), pt)
    assert frac_eval((a * b) * c, pt) == frac_eval(a * (b * c), pt)
    assert frac_eval(a * (b + c), pt) == frac_eval(a * b + a * c, pt)
    assert (a + b) + c == a + (b + c) and a * (b + c) == a * b + a * c


@given(polys, polys, points)
def test_evaluate_is_a_homomorphism(a, b, pt):
    assert frac_eval(mul(a, b), pt) == frac_eval(a, pt) * frac_eval(b, pt)
    assert frac_eval(add(a, b), pt) == frac_eval(a, pt) + frac_eval(b, pt)


@given(st.lists(st.tuples(exponents, coefficients), min_size=1, max_size=6), st.randoms())
def test_leading_term_ignores_input_order(terms, rnd):
    shuffled = list(terms)
    rnd.shuffle(shuffled)
    build = lambda ts: sum((PolyExpr({e: c}, VARS) for e, c in ts), PolyExpr.zero(VARS))
    assert leading_term(build(terms)) == leading_term(build(shuffled))


@given(polys)
def test_leading_term_is_maximal(p):
    if p.is_zero():
        return
    lt = leading_term(p)
    key = lambda m: (m.degree, tuple(m.exponent(v) for v in VARS))
    assert all(key(lt) >= key(m) for m in p.monomials)


@given(polys)
def test_string_round_trip(p):
    assert parse(str(p), VARS) == p
