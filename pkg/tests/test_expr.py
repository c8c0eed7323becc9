import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ncint import expr as ex
from ncint.errors import DomainError, ParseError, UnboundVariable

import oracles

NAMES = ("x", "y", "z")

leaves = st.one_of(
    st.sampled_from(NAMES).map(ex.Var),
    st.floats(-5, 5, allow_nan=False).map(lambda v: ex.Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: ex.Binary(*t)),
        st.tuples(st.sampled_from(["-", "sqrt", "exp", "log", "sin", "cos", "sinh", "cosh"]),
                  children).map(lambda t: ex.Unary(*t)),
        st.tuples(children, st.sampled_from([2.0, 3.0, -1.0, 0.5])).map(lambda t: ex.Pow(*t)),
    )


expressions = st.recursive(leaves, _extend, max_leaves=8)
points = st.fixed_dictionaries({n: st.floats(-2, 2, allow_nan=False) for n in NAMES})


def _value_or_none(e, p):
    try:
        return ex.evaluate(e, p)
    except DomainError:
        return None


@settings(max_examples=300, deadline=None)
@given(expressions, points)
def test_printed_form_parses_back_to_the_same_values(e, p):
    back = ex.parse(str(e))
    a, b = _value_or_none(e, p), _value_or_none(back, p)
    if a is None:
        return
    assert b is not None
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(expressions, points)
def test_folding_preserves_values(e, p):
    a = _value_or_none(e, p)
    assume(a is not None)
    b = _value_or_none(ex.fold_constants(e), p)
    assert b is not None
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(expressions, points)
def test_compiled_matches_interpreted(e, p):
    a = _value_or_none(e, p)
    fn = ex.compile_expr(e, NAMES)
    try:
        b = fn([p[n] for n in NAMES])
    except DomainError:
        b = None
    assert (a is None) == (b is None)
    if a is not None:
        assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(NAMES))
def test_derivative_matches_central_differences(seed, name):
    rng = np.random.default_rng(seed)
    e = oracles.smooth_random_expression(rng, NAMES)
    p = dict(zip(NAMES, rng.uniform(-1.5, 1.5, 3)))
    try:
        if abs(ex.evaluate(e, p)) > 1e6:
            return
    except DomainError:
        return
    sym = ex.evaluate(ex.differentiate(e, name), p)
    assert oracles.relative_gap(sym, oracles.central_derivative(e, name, p)) < 1e-6


@pytest.mark.parametrize("text, point, value", [
    ("sqrt(x1^2 + x2^2 - x3^2)", {"x1": 0, "x2": 5, "x3": 4}, 3.0),
    ("-2^2", {}, -4.0),
    ("2^3^2", {}, 512.0),
    ("1 - 2 - 3", {}, -4.0),
    ("8/4/2", {}, 1.0),
    ("cosh(0) + sinh(0)", {}, 1.0),
    ("2*-x", {"x": 3}, -6.0),
    ("1.5e2 + .5", {}, 150.5),
])
def test_evaluate_known_values(text, point, value):
    assert ex.evaluate(ex.parse(text), point) == pytest.approx(value)


@pytest.mark.parametrize("text, point", [
    ("sqrt(x)", {"x": -1}),
    ("log(x)", {"x": 0}),
    ("1/x", {"x": 0}),
    ("x^0.5", {"x": -1}),
    ("x^-1", {"x": 0}),
    ("exp(x)", {"x": 1000}),
])
def test_domain_errors_are_raised_not_nan(text, point):
    with pytest.raises(DomainError):
        ex.evaluate(ex.parse(text), point)
    with pytest.raises(DomainError):
        ex.compile_expr(ex.parse(text), list(point))(list(point.values()))


def test_unbound_variable_names_the_variable():
    with pytest.raises(UnboundVariable) as info:
        ex.evaluate(ex.parse("x + y"), {"x": 1})
    assert info.value.name == "y"


@pytest.mark.parametrize("text, column", [
    ("sqrt(x1^2+", 11), ("1 +* 2", 4), ("foo(x)", 1), ("x^y", 3), ("(x", 3), ("3 4", 3), ("", 1),
])
def test_parse_errors_carry_a_position(text, column):
    with pytest.raises(ParseError) as info:
        ex.parse(text)
    assert info.value.column == column


def test_parse_error_line_and_column_offset():
    with pytest.raises(ParseError) as info:
        ex.parse("x +", line=7, column=5)
    assert (info.value.line, info.value.column) == (7, 9)


@pytest.mark.parametrize("text, folded", [
    ("1*x1 + 0", "x1"),
    ("sinh(g)*0", "0"),
    ("x^1", "x"),
    ("x^0", "1"),
    ("-(-x)", "x"),
    ("a + -b", "a - b"),
    ("a - -b", "a + b"),
    ("(-a)*b", "-(a*b)"),
    ("(-a)/(-b)", "a/b"),
    ("2*3 + x", "6 + x"),
    ("0/x", "0"),
])
def test_folding_rules(text, folded):
    assert str(ex.fold_constants(ex.parse(text))) == folded


def test_folding_leaves_undefined_constants_alone():
    e = ex.fold_constants(ex.parse("sqrt(-1) + x"))
    with pytest.raises(DomainError):
        ex.evaluate(e, {"x": 0})


@pytest.mark.parametrize("text, name, want", [
    ("x^3", "x", "3*x^2"),
    ("sqrt(x)", "x", "1/(2*sqrt(x))"),
    ("sin(x)*y", "y", "sin(x)"),
    ("cosh(x)", "x", "sinh(x)"),
    ("x*y", "z", "0"),
])
def test_derivative_forms(text, name, want):
    assert str(ex.differentiate(ex.parse(text), name)) == want


def test_printer_keeps_grouping():
    for text in ("a*(b/c)", "a - (b - c)", "a/(b*c)", "(a + b)^2", "-(a + b)", "a - (-b)"):
        e = ex.parse(text)
        assert ex.parse(str(e)) == e


def test_variables_and_substitute():
    e = ex.parse("x*y + sin(z)")
    assert ex.variables(e) == {"x", "y", "z"}
    assert str(ex.substitute(ex.parse("x + y"), {"x": ex.parse("z^2")})) == "z^2 + y"


def test_operator_overloads_build_trees():
    x, y = ex.Var("x"), ex.Var("y")
    e = (2 * x + y / 3 - 1) ** 2
    assert ex.evaluate(e, {"x": 1, "y": 3}) == 4.0
    assert e(x=1.0, y=3.0) == 4.0
    with pytest.raises(TypeError):
        x ** y


def test_builder_functions_match_math():
    x = ex.Var("x")
    for build, ref in ((ex.sin, math.sin), (ex.cos, math.cos), (ex.exp, math.exp),
                       (ex.sinh, math.sinh), (ex.cosh, math.cosh), (ex.sqrt, math.sqrt), (ex.log, math.log)):
        assert ex.evaluate(build(x), {"x": 0.7}) == pytest.approx(ref(0.7))
