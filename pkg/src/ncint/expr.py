"""Minimal symbolic scalar expressions over named real coordinates.

Expressions are immutable trees built from constants, variables, the unary
functions ``sqrt exp log sin cos sinh cosh`` (plus negation), the binary
operators ``+ - * /`` and powers with a constant real exponent.  The module
provides exact differentiation, constant folding, an infix parser/printer
and a code generator that turns a tree into a plain Python callable.

Evaluation never propagates NaN silently: a point outside the domain of an
expression (negative ``sqrt`` argument, ``log`` of a non-positive number,
division by zero, overflow) raises :class:`~ncint.errors.DomainError`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import DomainError, ParseError, UnboundVariable

__all__ = [
    "Expression", "Const", "Var", "Unary", "Binary", "Pow",
    "const", "var", "sqrt", "exp", "log", "sin", "cos", "sinh", "cosh",
    "as_expr", "evaluate", "differentiate", "fold_constants", "substitute",
    "variables", "parse", "compile_expr", "compile_many", "ZERO", "ONE",
]

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "sinh", "cosh")

# printing precedence
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class Expression:
    """Base class of expression nodes; supplies arithmetic operator overloads."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("+", self, as_expr(other))

    def __radd__(self, other):
        return Binary("+", as_expr(other), self)

    def __sub__(self, other):
        return Binary("-", self, as_expr(other))

    def __rsub__(self, other):
        return Binary("-", as_expr(other), self)

    def __mul__(self, other):
        return Binary("*", self, as_expr(other))

    def __rmul__(self, other):
        return Binary("*", as_expr(other), self)

    def __truediv__(self, other):
        return Binary("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary("/", as_expr(other), self)

    def __pow__(self, exponent):
        if isinstance(exponent, Expression):
            folded = fold_constants(exponent)
            if not isinstance(folded, Const):
                raise TypeError("exponent must be a constant")
            exponent = folded.value
        return Pow(self, float(exponent))

    def __neg__(self):
        return Unary("-", self)

    def __pos__(self):
        return self

    def __str__(self):
        return _to_str(self)

    # evaluation convenience
    def __call__(self, **point: float) -> float:
        return evaluate(self, point)


@dataclass(frozen=True, repr=False, eq=True)
class Const(Expression):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False, eq=True)
class Var(Expression):
    name: str

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False, eq=True)
class Unary(Expression):
    op: str  # "-" or one of FUNCTIONS
    arg: Expression

    def __post_init__(self):
        if self.op != "-" and self.op not in FUNCTIONS:
            raise ValueError(f"unknown unary operator {self.op!r}")

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, repr=False, eq=True)
class Binary(Expression):
    op: str  # + - * /
    left: Expression
    right: Expression

    def __post_init__(self):
        if self.op not in "+-*/" or len(self.op) != 1:
            raise ValueError(f"unknown binary operator {self.op!r}")

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False, eq=True)
class Pow(Expression):
    base: Expression
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "exponent", float(self.exponent))

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(float(value))


def const(value: float) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def _fn(name):
    def build(arg):
        return Unary(name, as_expr(arg))
    build.__name__ = name
    build.__doc__ = f"Build ``{name}(arg)``."
    return build


sqrt = _fn("sqrt")
exp = _fn("exp")
log = _fn("log")
sin = _fn("sin")
cos = _fn("cos")
sinh = _fn("sinh")
cosh = _fn("cosh")


# ---------------------------------------------------------------------------
# evaluation

def _checked_sqrt(x):
    if x < 0.0:
        raise DomainError(f"sqrt of negative argument {x!r}")
    return math.sqrt(x)


def _checked_log(x):
    if x <= 0.0:
        raise DomainError(f"log of non-positive argument {x!r}")
    return math.log(x)


def _checked_div(a, b):
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _checked_pow(b, e):
    if b < 0.0 and not e.is_integer():
        raise DomainError(f"negative base {b!r} with non-integer exponent {e!r}")
    if b == 0.0 and e < 0.0:
        raise DomainError("zero base with negative exponent")
    return b ** e


_UNARY_IMPL: dict[str, Callable[[float], float]] = {
    "-": lambda x: -x,
    "sqrt": _checked_sqrt,
    "exp": math.exp,
    "log": _checked_log,
    "sin": math.sin,
    "cos": math.cos,
    "sinh": math.sinh,
    "cosh": math.cosh,
}


def _finite(value):
    if not math.isfinite(value):
        raise DomainError(f"non-finite value {value!r}")
    return value


def evaluate(expr: Expression, point: Mapping[str, float]) -> float:
    """Evaluate ``expr`` in double precision at the named-coordinate ``point``.

    Raises UnboundVariable for a missing coordinate and DomainError when the
    point is outside the expression's domain.
    """
    try:
        return _finite(_eval(expr, point))
    except (OverflowError, ZeroDivisionError) as exc:
        raise DomainError(str(exc)) from None


def _eval(e, point):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(point[e.name])
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Unary):
        return _UNARY_IMPL[e.op](_eval(e.arg, point))
    if isinstance(e, Binary):
        a = _eval(e.left, point)
        b = _eval(e.right, point)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return _checked_div(a, b)
    if isinstance(e, Pow):
        return _checked_pow(_eval(e.base, point), e.exponent)
    raise TypeError(f"not an expression: {e!r}")


def variables(expr: Expression) -> frozenset[str]:
    """Names of all variables occurring in ``expr``."""
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, Const):
        return frozenset()
    if isinstance(expr, Unary):
        return variables(expr.arg)
    if isinstance(expr, Pow):
        return variables(expr.base)
    return variables(expr.left) | variables(expr.right)


def substitute(expr: Expression, mapping: Mapping[str, Expression]) -> Expression:
    """Replace variables by expressions (simultaneous substitution)."""
    if isinstance(expr, Var):
        return mapping.get(expr.name, expr)
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Unary):
        return Unary(expr.op, substitute(expr.arg, mapping))
    if isinstance(expr, Pow):
        return Pow(substitute(expr.base, mapping), expr.exponent)
    return Binary(expr.op, substitute(expr.left, mapping), substitute(expr.right, mapping))


# ---------------------------------------------------------------------------
# differentiation

def differentiate(expr: Expression, name: str) -> Expression:
    """Exact partial derivative of ``expr`` with respect to ``name``, folded."""
    return fold_constants(_diff(expr, name))


def _diff(e, x):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == x else ZERO
    if x not in variables(e):
        return ZERO
    if isinstance(e, Unary):
        u, du = e.arg, _diff(e.arg, x)
        op = e.op
        if op == "-":
            return -du
        if op == "sqrt":
            return du / (Const(2.0) * e)
        if op == "exp":
            return e * du
        if op == "log":
            return du / u
        if op == "sin":
            return Unary("cos", u) * du
        if op == "cos":
            return -(Unary("sin", u)) * du
        if op == "sinh":
            return Unary("cosh", u) * du
        if op == "cosh":
            return Unary("sinh", u) * du
    if isinstance(e, Binary):
        u, v = e.left, e.right
        du, dv = _diff(u, x), _diff(v, x)
        if e.op == "+":
            return du + dv
        if e.op == "-":
            return du - dv
        if e.op == "*":
            return du * v + u * dv
        return (du * v - u * dv) / Pow(v, 2.0)
    if isinstance(e, Pow):
        c = e.exponent
        return Const(c) * Pow(e.base, c - 1.0) * _diff(e.base, x)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# constant folding

def fold_constants(expr: Expression) -> Expression:
    """Collapse constant subtrees and identity/absorbing elements.

    The result evaluates identically wherever the input is defined; applying
    the fold twice gives the same tree.
    """
    if isinstance(expr, (Const, Var)):
        return expr
    if isinstance(expr, Unary):
        return _fold_node(Unary(expr.op, fold_constants(expr.arg)))
    if isinstance(expr, Pow):
        return _fold_node(Pow(fold_constants(expr.base), expr.exponent))
    return _fold_node(Binary(expr.op, fold_constants(expr.left), fold_constants(expr.right)))


def _try_value(node):
    try:
        return Const(evaluate(node, {}))
    except DomainError:
        return None


def _is(e, value):
    return isinstance(e, Const) and e.value == value


def _fold_node(e):
    # children of e are already folded
    if isinstance(e, Unary):
        a = e.arg
        if isinstance(a, Const):
            return _try_value(e) or e
        if e.op == "-" and isinstance(a, Unary) and a.op == "-":
            return a.arg
        return e
    if isinstance(e, Pow):
        b, c = e.base, e.exponent
        if isinstance(b, Const):
            return _try_value(e) or e
        if c == 1.0:
            return b
        if c == 0.0:
            return ONE
        return e
    a, b, op = e.left, e.right, e.op
    if isinstance(a, Const) and isinstance(b, Const):
        return _try_value(e) or e
    if op == "+":
        if _is(a, 0.0):
            return b
        if _is(b, 0.0):
            return a
        if isinstance(b, Unary) and b.op == "-":
            return _fold_node(Binary("-", a, b.arg))
        if isinstance(b, Const) and b.value < 0:
            return Binary("-", a, Const(-b.value))
        return e
    if op == "-":
        if _is(b, 0.0):
            return a
        if _is(a, 0.0):
            return _fold_node(Unary("-", b))
        if isinstance(b, Unary) and b.op == "-":
            return _fold_node(Binary("+", a, b.arg))
        return e
    if op == "*":
        if _is(a, 0.0) or _is(b, 0.0):
            return ZERO
        if _is(a, 1.0):
            return b
        if _is(b, 1.0):
            return a
        if _is(a, -1.0):
            return _fold_node(Unary("-", b))
        if _is(b, -1.0):
            return _fold_node(Unary("-", a))
        return _hoist_negation(e)
    # division
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if _is(b, -1.0):
        return _fold_node(Unary("-", a))
    return _hoist_negation(e)


def _is_neg(e):
    return isinstance(e, Unary) and e.op == "-"


def _hoist_negation(e):
    # (-a)*b -> -(a*b), a/(-b) -> -(a/b), so sums can absorb the sign
    a, b = e.left, e.right
    if _is_neg(a) and _is_neg(b):
        return _fold_node(Binary(e.op, a.arg, b.arg))
    if _is_neg(a):
        return Unary("-", _fold_node(Binary(e.op, a.arg, b)))
    if _is_neg(b):
        return Unary("-", _fold_node(Binary(e.op, a, b.arg)))
    return e


# ---------------------------------------------------------------------------
# printing

def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e):
    if isinstance(e, Const):
        return _PREC_NEG if e.value < 0 else _PREC_ATOM
    if isinstance(e, Var):
        return _PREC_ATOM
    if isinstance(e, Unary):
        return _PREC_NEG if e.op == "-" else _PREC_ATOM
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ADD if e.op in "+-" else _PREC_MUL


def _wrap(e, paren):
    s = _to_str(e)
    return f"({s})" if paren else s


def _to_str(e) -> str:
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "-":
            return "-" + _wrap(e.arg, _prec(e.arg) < _PREC_NEG)
        return f"{e.op}({_to_str(e.arg)})"
    if isinstance(e, Pow):
        return _wrap(e.base, _prec(e.base) <= _PREC_POW) + "^" + _fmt_number(e.exponent)
    p = _prec(e)
    left = _wrap(e.left, _prec(e.left) < p)
    rp = _prec(e.right)
    right = _wrap(e.right, rp <= p or rp == _PREC_NEG)
    if e.op in "+-":
        return f"{left} {e.op} {right}"
    return f"{left}{e.op}{right}"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


class _Parser:
    def __init__(self, text, line=None, col_offset=0):
        self.text = text
        self.line = line
        self.col_offset = col_offset
        self.tokens = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            if m is None or m.end() == pos:
                self._fail(f"unexpected character {stripped[pos]!r}", pos)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def _fail(self, msg, pos):
        raise ParseError(msg, self.line if self.line is not None else 1,
                         self.col_offset + pos + 1)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            self._fail("unexpected end of expression", len(self.text.rstrip()))
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            self._fail(f"expected {value!r}, got {tok[1]!r}", tok[2])

    def parse(self):
        if not self.tokens:
            self._fail("empty expression", 0)
        e = self.expr()
        tok = self.peek()
        if tok is not None:
            self._fail(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while (tok := self.peek()) is not None and tok[1] in ("+", "-"):
            self.i += 1
            e = Binary(tok[1], e, self.term())
        return e

    def term(self):
        e = self.unary()
        while (tok := self.peek()) is not None and tok[1] in ("*", "/"):
            self.i += 1
            e = Binary(tok[1], e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok is not None and tok[1] == "-":
            self.i += 1
            operand = self.unary()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Unary("-", operand)
        if tok is not None and tok[1] == "+":
            self.i += 1
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[1] == "^":
            self.i += 1
            start = self.peek()
            exponent = fold_constants(self.unary())
            if not isinstance(exponent, Const):
                self._fail("exponent must be a constant",
                           start[2] if start else len(self.text))
            return Pow(base, exponent.value)
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            nxt = self.peek()
            if value in FUNCTIONS:
                if nxt is None or nxt[1] != "(":
                    self._fail(f"function {value} requires parentheses", pos)
                self.i += 1
                arg = self.expr()
                self.expect(")")
                return Unary(value, arg)
            if nxt is not None and nxt[1] == "(":
                self._fail(f"unknown function {value!r}", pos)
            return Var(value)
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        self._fail(f"unexpected token {value!r}", pos)


def parse(text: str, *, line: int | None = None, column: int = 0) -> Expression:
    """Parse an infix ASCII expression.

    ``line``/``column`` offset the position reported in ParseError, so
    callers parsing embedded expressions can report file positions.
    """
    return _Parser(text, line, column).parse()


# ---------------------------------------------------------------------------
# compilation to Python callables

_CODE_UNARY = {
    "-": "(-{})", "sqrt": "_sqrt({})", "exp": "_exp({})", "log": "_log({})",
    "sin": "_sin({})", "cos": "_cos({})", "sinh": "_sinh({})", "cosh": "_cosh({})",
}

_NAMESPACE = {
    "_sqrt": _checked_sqrt, "_log": _checked_log, "_div": _checked_div,
    "_pow": _checked_pow, "_exp": math.exp, "_sin": math.sin, "_cos": math.cos,
    "_sinh": math.sinh, "_cosh": math.cosh, "_isfinite": math.isfinite,
}


def _code(e, index):
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        try:
            return f"x[{index[e.name]}]"
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Unary):
        return _CODE_UNARY[e.op].format(_code(e.arg, index))
    if isinstance(e, Pow):
        return f"_pow({_code(e.base, index)}, {e.exponent!r})"
    a, b = _code(e.left, index), _code(e.right, index)
    if e.op == "/":
        return f"_div({a}, {b})"
    return f"({a} {e.op} {b})"


def compile_many(exprs: Sequence[Expression], coords: Sequence[str]) -> Callable[[Sequence[float]], list[float]]:
    """Compile expressions into ``f(x) -> list`` with ``x`` ordered as ``coords``."""
    index = {name: i for i, name in enumerate(coords)}
    body = ", ".join(_code(e, index) for e in exprs)
    src = (
        "def _f(x):\n"
        "    try:\n"
        f"        out = [{body}]\n"
        "    except (OverflowError, ZeroDivisionError) as exc:\n"
        "        raise DomainError(str(exc)) from None\n"
        "    for v in out:\n"
        "        if not _isfinite(v):\n"
        "            raise DomainError('non-finite value')\n"
        "    return out\n"
    )
    ns = dict(_NAMESPACE, DomainError=DomainError)
    exec(compile(src, "<ncint.expr>", "exec"), ns)
    return ns["_f"]


def compile_expr(expr: Expression, coords: Sequence[str]) -> Callable[[Sequence[float]], float]:
    """Compile one expression into ``f(x) -> float``."""
    many = compile_many([expr], coords)
    return lambda x: many(x)[0]


def point_dict(coords: Iterable[str], values: Iterable[float]) -> dict[str, float]:
    return dict(zip(coords, (float(v) for v in values)))
