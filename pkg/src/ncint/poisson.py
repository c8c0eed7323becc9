"""Poisson bivectors and symplectic forms on a single coordinate chart.

Sign conventions (fixed for the whole package):

* a wedge term ``a * d_i ^ d_j`` contributes ``W[i, j] = a`` and ``W[j, i] = -a``;
* the bracket is ``{f, g} = sum_ij W[i, j] * d_i f * d_j g``;
* the Hamiltonian vector field of ``H`` is the derivation ``f -> {H, f}``,
  so its components are ``X_H[i] = {H, z_i} = sum_j W[j, i] * d_j H``;
* a symplectic form and its bivector are related by ``W = -inv(Omega)``, so
  the form ``dJ^dy + dp^dq`` corresponds to the bivector ``d_J^d_y + d_p^d_q``
  and Hamilton's equations read ``dy/dt = dH/dJ``, ``dq/dt = dH/dp``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import DegenerateForm, SingularChart, UnboundVariable
from .expr import Expression

__all__ = [
    "PoissonStructure", "SymplecticForm", "VectorField",
    "bracket", "hamiltonian_vector_field", "jacobi_residual",
    "invert_symplectic", "pushforward_bivector", "numeric_rank",
]


def _check_vars(e: Expression, coords: Sequence[str]):
    missing = ex.variables(e) - set(coords)
    if missing:
        raise UnboundVariable(sorted(missing)[0])


def _as_point(point, coords):
    if isinstance(point, Mapping):
        return [float(point[c]) for c in coords]
    return [float(v) for v in point]


@dataclass(frozen=True)
class _Antisymmetric:
    """Antisymmetric matrix of expressions stored as its strict upper triangle."""

    coords: tuple[str, ...]
    upper: Mapping[tuple[int, int], Expression] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        clean = {}
        for (i, j), e in dict(self.upper).items():
            e = ex.fold_constants(ex.as_expr(e))
            if i == j:
                raise ValueError("diagonal entries of an antisymmetric tensor must vanish")
            if i > j:
                i, j, e = j, i, ex.fold_constants(-e)
            if not (0 <= i < j < len(self.coords)):
                raise IndexError(f"entry ({i}, {j}) out of range")
            _check_vars(e, self.coords)
            if e != ex.ZERO:
                clean[(i, j)] = e
        object.__setattr__(self, "upper", clean)

    @classmethod
    def from_wedges(cls, coords, terms):
        """Build from ``[(coefficient, name_i, name_j), ...]`` wedge terms."""
        coords = tuple(coords)
        idx = {c: n for n, c in enumerate(coords)}
        acc: dict[tuple[int, int], Expression] = {}
        for coef, a, b in terms:
            i, j = idx[a], idx[b]
            coef = ex.as_expr(coef)
            if i > j:
                i, j, coef = j, i, -coef
            acc[(i, j)] = acc[(i, j)] + coef if (i, j) in acc else coef
        return cls(coords, acc)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def entry(self, i: int, j: int) -> Expression:
        if i == j:
            return ex.ZERO
        if i < j:
            return self.upper.get((i, j), ex.ZERO)
        e = self.upper.get((j, i))
        return ex.ZERO if e is None else ex.fold_constants(-e)

    def matrix(self) -> list[list[Expression]]:
        return [[self.entry(i, j) for j in range(self.dim)] for i in range(self.dim)]

    @cached_property
    def _compiled(self):
        keys = sorted(self.upper)
        return keys, ex.compile_many([self.upper[k] for k in keys], self.coords)

    def evaluate(self, point) -> np.ndarray:
        """Numeric dim x dim matrix at ``point`` (mapping or coordinate-ordered sequence)."""
        x = _as_point(point, self.coords)
        keys, fn = self._compiled
        out = np.zeros((self.dim, self.dim))
        for (i, j), v in zip(keys, fn(x)):
            out[i, j] = v
            out[j, i] = -v
        return out

    def is_constant(self) -> bool:
        return all(isinstance(e, ex.Const) for e in self.upper.values())


class PoissonStructure(_Antisymmetric):
    """Bivector field ``W`` on a chart; ``W[i, j]`` are expressions in the coordinates."""

    def __repr__(self):
        terms = ", ".join(f"W[{self.coords[i]},{self.coords[j]}]={e}" for (i, j), e in sorted(self.upper.items()))
        return f"PoissonStructure({list(self.coords)}; {terms})"


class SymplecticForm(_Antisymmetric):
    """Two-form ``Omega`` on an even-dimensional chart."""

    def __post_init__(self):
        super().__post_init__()
        if self.dim % 2:
            raise ValueError("a symplectic form needs an even-dimensional chart")

    def to_poisson(self) -> PoissonStructure:
        """Symbolic bivector; only available when all components are constant."""
        if not self.is_constant():
            raise ValueError("symbolic inversion is only supported for constant forms")
        W = invert_symplectic(self, [0.0] * self.dim)
        upper = {(i, j): ex.Const(W[i, j]) for i in range(self.dim) for j in range(i + 1, self.dim)}
        return PoissonStructure(self.coords, upper)

    def __repr__(self):
        terms = ", ".join(f"O[{self.coords[i]},{self.coords[j]}]={e}" for (i, j), e in sorted(self.upper.items()))
        return f"SymplecticForm({list(self.coords)}; {terms})"


@dataclass(frozen=True)
class VectorField:
    coords: tuple[str, ...]
    components: tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        comps = tuple(ex.fold_constants(ex.as_expr(c)) for c in self.components)
        if len(comps) != len(self.coords):
            raise ValueError("component count must equal the chart dimension")
        object.__setattr__(self, "components", comps)

    @cached_property
    def _compiled(self):
        return ex.compile_many(self.components, self.coords)

    def at(self, point) -> np.ndarray:
        return np.array(self._compiled(_as_point(point, self.coords)))

    __call__ = at

    def apply(self, f: Expression) -> Expression:
        """Directional derivative of ``f`` along the field, as an expression."""
        acc: Expression = ex.ZERO
        for name, comp in zip(self.coords, self.components):
            acc = acc + comp * ex.differentiate(f, name)
        return ex.fold_constants(acc)

    def scaled(self, factor) -> "VectorField":
        factor = ex.as_expr(factor)
        return VectorField(self.coords, [factor * c for c in self.components])

    def __add__(self, other: "VectorField") -> "VectorField":
        if self.coords != other.coords:
            raise ValueError("vector fields live on different charts")
        return VectorField(self.coords, [a + b for a, b in zip(self.components, other.components)])

    def __str__(self):
        parts = [f"({c})*d/d{n}" for n, c in zip(self.coords, self.components) if c != ex.ZERO]
        return " + ".join(parts) if parts else "0"


def bracket(f: Expression, g: Expression, P: PoissonStructure) -> Expression:
    """Symbolic Poisson bracket ``{f, g} = W[i, j] d_i f d_j g``, constant-folded."""
    f, g = ex.as_expr(f), ex.as_expr(g)
    _check_vars(f, P.coords)
    _check_vars(g, P.coords)
    if f == g:
        return ex.ZERO  # antisymmetry
    df = [ex.differentiate(f, c) for c in P.coords]
    dg = [ex.differentiate(g, c) for c in P.coords]
    acc: Expression = ex.ZERO
    for (i, j), w in sorted(P.upper.items()):
        # W[i,j] (df_i dg_j - df_j dg_i)
        term = ex.fold_constants(df[i] * dg[j] - df[j] * dg[i])
        if term != ex.ZERO:
            acc = acc + w * term
    return ex.fold_constants(acc)


def hamiltonian_vector_field(H: Expression, P: PoissonStructure) -> VectorField:
    """Field of the derivation ``f -> {H, f}``."""
    H = ex.as_expr(H)
    _check_vars(H, P.coords)
    dH = [ex.differentiate(H, c) for c in P.coords]
    comps = []
    for i in range(P.dim):
        acc: Expression = ex.ZERO
        for j in range(P.dim):
            w = P.entry(j, i)
            if w != ex.ZERO and dH[j] != ex.ZERO:
                acc = acc + w * dH[j]
        comps.append(acc)
    return VectorField(P.coords, comps)


def jacobi_residual(P: PoissonStructure, f, g, h, point) -> float:
    """``{f,{g,h}} + {g,{h,f}} + {h,{f,g}}`` evaluated at ``point``."""
    f, g, h = (ex.as_expr(e) for e in (f, g, h))
    total = (bracket(f, bracket(g, h, P), P) + bracket(g, bracket(h, f, P), P)
             + bracket(h, bracket(f, g, P), P))
    pt = point if isinstance(point, Mapping) else dict(zip(P.coords, point))
    return ex.evaluate(ex.fold_constants(total), pt)


def invert_symplectic(S: SymplecticForm, point, *, det_tol: float = 1e-12) -> np.ndarray:
    """Bivector matrix ``W = -inv(Omega)`` of the form at ``point``."""
    omega = S.evaluate(point)
    if abs(np.linalg.det(omega)) < det_tol:
        raise DegenerateForm("symplectic form is degenerate at the given point")
    return -np.linalg.inv(omega)


def numeric_rank(M: np.ndarray, rel_tol: float = 1e-9) -> int:
    """Rank from singular values, counting those above ``rel_tol * max``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def chart_jacobian(chart: Sequence[Expression], coords: Sequence[str], point) -> np.ndarray:
    x = dict(zip(coords, _as_point(point, coords)))
    return np.array([[ex.evaluate(ex.differentiate(ex.as_expr(c), name), x) for name in coords]
                     for c in chart])


def pushforward_bivector(P, chart: Sequence[Expression], point) -> np.ndarray:
    """Components ``W'[a, b] = d_i chart_a W[i, j] d_j chart_b`` at ``point``.

    ``chart`` holds one expression per new coordinate, written in ``P.coords``.
    """
    coords = P.coords
    for c in chart:
        _check_vars(ex.as_expr(c), coords)
    J = chart_jacobian(chart, coords, point)
    if numeric_rank(J) < min(J.shape):
        raise SingularChart("chart Jacobian is rank deficient at the given point")
    return J @ P.evaluate(point) @ J.T
