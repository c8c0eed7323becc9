"""Reference computations that never call the symbolic differentiator.

Derivatives come from central differences on plain evaluation, so agreement
with ``ncint.expr.differentiate`` or ``ncint.poisson.bracket`` is evidence
from an independent route.
"""
from __future__ import annotations

import math

import numpy as np

from ncint import expr as ex


def value(f, coords, x) -> float:
    return ex.evaluate(f, dict(zip(coords, map(float, x))))


def _richardson(g, x0: float, h: float) -> float:
    # central difference at h and h/2, extrapolated to fourth order
    def d(step):
        return (g(x0 + step) - g(x0 - step)) / (2 * step)
    step = h * max(1.0, abs(x0))
    return (4 * d(step / 2) - d(step)) / 3


def central_gradient(f, coords, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty(len(coords))
    for i in range(len(coords)):
        def along(t, i=i):
            y = x.copy()
            y[i] = t
            return value(f, coords, y)
        g[i] = _richardson(along, x[i], h)
    return g


def central_derivative(f, name: str, point: dict, h: float = 1e-5) -> float:
    return _richardson(lambda t: ex.evaluate(f, dict(point, **{name: t})), point[name], h)


def fd_bracket(f, g, W: np.ndarray, coords, x) -> float:
    """``grad f . W . grad g`` with both gradients from central differences."""
    return float(central_gradient(f, coords, x) @ W @ central_gradient(g, coords, x))


def smooth_random_expression(rng: np.random.Generator, names, depth: int = 3) -> ex.Expression:
    """Random expression that is smooth on all of R^n.

    Every operation with a restricted domain is fed ``1 + u^2``, so the
    result is defined and differentiable everywhere and central differences
    are well conditioned on moderate boxes.
    """
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return ex.Var(str(rng.choice(names)))
        return ex.Const(float(np.round(rng.uniform(-2, 2), 3)))
    sub = lambda: smooth_random_expression(rng, names, depth - 1)  # noqa: E731
    pos = lambda u: 1 + u ** 2  # noqa: E731
    kind = int(rng.integers(0, 10))
    if kind == 0:
        return sub() + sub()
    if kind == 1:
        return sub() - sub()
    if kind == 2:
        return sub() * sub()
    if kind == 3:
        return sub() / pos(sub())
    if kind == 4:
        return ex.sin(sub())
    if kind == 5:
        return ex.cos(sub())
    if kind == 6:
        return ex.log(pos(sub()))
    if kind == 7:
        return ex.sqrt(pos(sub()))
    if kind == 8:
        return pos(sub()) ** float(rng.choice([-1.5, -1.0, 0.5, 2.0, 3.0]))
    return ex.exp(ex.sin(sub()))


def relative_gap(a: float, b: float) -> float:
    """``|a - b|`` relative to ``max(1, |b|)``, so values near zero are compared absolutely."""
    return abs(a - b) / max(1.0, abs(b))


def so21_box_points(rng: np.random.Generator, count: int) -> np.ndarray:
    """Regular coalgebra points: ``x2 > |x3|`` and ``r > |x1|``."""
    pts = np.column_stack([rng.uniform(-0.5, 0.5, count), rng.uniform(2, 3, count),
                           rng.uniform(-1, 1, count)])
    assert all(p[1] > abs(p[2]) and math.sqrt(p[0] ** 2 + p[1] ** 2 - p[2] ** 2) > abs(p[0]) for p in pts)
    return pts
