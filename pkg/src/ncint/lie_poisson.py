"""Lie-Poisson structures on the dual of a finite-dimensional Lie algebra."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import DomainError, IndexOutOfRange, InvalidStructureConstants
from .poisson import PoissonStructure, VectorField, _as_point, bracket

__all__ = [
    "LieAlgebra", "CasimirReport", "lie_poisson_bivector", "coadjoint_action",
    "verify_casimir", "so3", "so21", "abelian",
]


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """Structure constants ``c[i, j, h]`` with ``[e_i, e_j] = c[i, j, h] e_h``.

    ``names`` are the coalgebra coordinate names (default ``x1..xk``).
    """

    constants: np.ndarray
    names: tuple[str, ...] = ()
    tol: float = 1e-12

    def __post_init__(self):
        c = np.asarray(self.constants, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise InvalidStructureConstants("structure constants must be a k x k x k array")
        k = c.shape[0]
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(k))
        if len(names) != k:
            raise ValueError("need one coordinate name per basis element")
        object.__setattr__(self, "constants", c)
        object.__setattr__(self, "names", names)
        anti = np.max(np.abs(c + c.transpose(1, 0, 2)), initial=0.0)
        if anti > self.tol:
            raise InvalidStructureConstants(f"antisymmetry violated by {anti:.3g}")
        jac = self.jacobi_defect()
        if jac > self.tol:
            raise InvalidStructureConstants(f"Jacobi identity violated by {jac:.3g}")

    @property
    def dim(self) -> int:
        return self.constants.shape[0]

    def jacobi_defect(self) -> float:
        c = self.constants
        # sum_h c_ij^h c_hl^m + cyclic(i, j, l)
        t = np.einsum("ijh,hlm->ijlm", c, c)
        total = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(total), initial=0.0))

    @classmethod
    def from_brackets(cls, k: int, relations: dict[tuple[int, int], dict[int, float]], names=()):
        """Build from 1-based relations ``{(i, j): {h: c_ij^h}}``; antisymmetric partners are implied."""
        c = np.zeros((k, k, k))
        for (i, j), terms in relations.items():
            for h, v in terms.items():
                c[i - 1, j - 1, h - 1] = v
                c[j - 1, i - 1, h - 1] = -v
        return cls(c, tuple(names))


def so21(names=()) -> LieAlgebra:
    """so(2,1): {x1,x2} = -x3, {x2,x3} = x1, {x3,x1} = x2."""
    return LieAlgebra.from_brackets(3, {(1, 2): {3: -1.0}, (2, 3): {1: 1.0}, (3, 1): {2: 1.0}}, names)


def so3(names=()) -> LieAlgebra:
    """so(3) with ``c_ij^h = epsilon_ijh``."""
    return LieAlgebra.from_brackets(3, {(1, 2): {3: 1.0}, (2, 3): {1: 1.0}, (3, 1): {2: 1.0}}, names)


def abelian(k: int, names=()) -> LieAlgebra:
    return LieAlgebra(np.zeros((k, k, k)), tuple(names))


def _linear(coeffs, names) -> ex.Expression:
    acc: ex.Expression = ex.ZERO
    for v, name in zip(coeffs, names):
        if v != 0.0:
            term = ex.Var(name) if v == 1.0 else -ex.Var(name) if v == -1.0 else ex.Const(v) * ex.Var(name)
            acc = acc + term
    return ex.fold_constants(acc)


def lie_poisson_bivector(A: LieAlgebra) -> PoissonStructure:
    """``W[i, j] = c_ij^h x_h`` on the coalgebra chart ``A.names``."""
    upper = {}
    for i in range(A.dim):
        for j in range(i + 1, A.dim):
            upper[(i, j)] = _linear(A.constants[i, j], A.names)
    return PoissonStructure(A.names, upper)


def coadjoint_action(A: LieAlgebra, i: int) -> VectorField:
    """Infinitesimal coadjoint action of basis element ``i`` (1-based).

    Component ``j`` is ``c_ij^h x_h``.
    """
    if not 1 <= i <= A.dim:
        raise IndexOutOfRange(f"basis index {i} outside 1..{A.dim}")
    comps = [_linear(A.constants[i - 1, j], A.names) for j in range(A.dim)]
    return VectorField(A.names, comps)


@dataclass
class CasimirReport:
    passed: bool
    max_residual: float
    tolerance: float
    points_used: int
    excised: list[int]

    def to_dict(self):
        return {"pass": self.passed, "max_residual": self.max_residual, "tolerance": self.tolerance,
                "points_used": self.points_used, "excised": list(self.excised)}


def verify_casimir(C, P: PoissonStructure, points: Sequence, tol: float = 1e-9) -> CasimirReport:
    """Check ``{C, x_j} = 0`` for every chart coordinate at every point.

    Points where a bracket cannot be evaluated are excised and listed.
    """
    C = ex.as_expr(C)
    brackets = [bracket(C, ex.Var(name), P) for name in P.coords]
    fn = ex.compile_many(brackets, P.coords)
    worst, used, excised = 0.0, 0, []
    for n, p in enumerate(points):
        try:
            vals = fn(_as_point(p, P.coords))
        except DomainError:
            excised.append(n)
            continue
        used += 1
        worst = max(worst, max((abs(v) for v in vals), default=0.0))
    return CasimirReport(used > 0 and worst < tol, worst, tol, used, excised)
