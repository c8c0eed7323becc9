"""Sampled checks of the hypotheses of the noncommutative integrability theorem.

For a system ``H = (H_1..H_k)`` on a ``2n``-dimensional symplectic chart the
checker tests, at seeded sample points:

* submersion: the Jacobian ``dH`` has rank ``k``;
* closure: the structure matrix ``s_ij = {H_i, H_j}`` is constant along
  fibers (sampled by flowing along the Casimir pullback fields);
* corank: ``k - rank(s) = 2n - k`` at generic points;
* isotropy: ``Omega(v_a, v_b) = 0`` for the Casimir pullback fields;
* fiber invariance: every Casimir pullback field annihilates every ``H_i``;
* structure validity: Jacobi identity (bivector) or ``dOmega = 0`` (form).

Completeness of the Hamiltonian flows cannot be decided from samples; it is
reported as an advisory only.  Global connectedness of the fibers and their
mutual diffeomorphism are recorded as assumptions.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import DomainError, FlowEscapedChart, MissingCasimirs, StepUnderflow, ValidationError
from .flows import integrate_flow
from .poisson import PoissonStructure, SymplecticForm, VectorField, numeric_rank
from .systems import SystemDefinition

__all__ = [
    "casimir_pullback_fields", "check_submersion", "structure_matrix", "structure_matrix_report",
    "StructureMatrixReport", "corank", "check_closure", "check_isotropy", "check_fiber_invariance",
    "coinduced_bracket_check", "check_structure", "completeness_advisory", "verify_hypotheses",
    "HypothesisReport", "DEFAULT_FLOW_TIMES",
]

log = logging.getLogger(__name__)

DEFAULT_FLOW_TIMES = (0.5, 1.0, 2.0, 5.0)
RANK_TOL = 1e-9


def _field_at(fld, x):
    return fld.at(x) if isinstance(fld, VectorField) else np.asarray(fld(x), dtype=float)


def casimir_pullback_fields(sys: SystemDefinition, casimirs: Sequence | None = None) -> list:
    """Fields ``v_a = sum_i (dC_a/dx_i o H) X_{H_i}`` by the chain rule.

    Symbolic VectorFields when the system has a symbolic bivector, numeric
    callables otherwise.
    """
    casimirs = sys.casimirs if casimirs is None else tuple(ex.as_expr(c) for c in casimirs)
    if not casimirs:
        raise MissingCasimirs(f"system {sys.name!r} declares no Casimir functions")
    subs = dict(zip(sys.coalgebra_names, sys.integrals))
    out = []
    if sys.poisson is not None:
        ham = [sys.hamiltonian_field(h) for h in sys.integrals]
        for C in casimirs:
            acc = VectorField(sys.coords, [ex.ZERO] * sys.dim)
            for xi, Xi in zip(sys.coalgebra_names, ham):
                coef = ex.fold_constants(ex.substitute(ex.differentiate(C, xi), subs))
                if coef != ex.ZERO:
                    acc = acc + Xi.scaled(coef)
            out.append(acc)
        return out
    for C in casimirs:
        dC = ex.compile_many([ex.differentiate(C, xi) for xi in sys.coalgebra_names], sys.coalgebra_names)

        def field_at(x, dC=dC):
            a = np.array(dC(list(sys.integral_values(x))))
            # sum_i a_i X_{H_i} with X_H = W^T dH
            return sys.bivector_at(x).T @ (sys.integral_jacobian(x).T @ a)
        out.append(field_at)
    return out


# ---------------------------------------------------------------------------
# pointwise checks

@dataclass
class SubmersionResult:
    passed: bool
    ranks: list[int]
    k: int

    def to_dict(self):
        return {"pass": self.passed, "k": self.k, "ranks": self.ranks}


def check_submersion(sys: SystemDefinition, points) -> SubmersionResult:
    """Rank of ``[dH_i/dz_j]`` at each point (singular values above 1e-9 * max)."""
    ranks = [numeric_rank(sys.integral_jacobian(x), RANK_TOL) for x in points]
    return SubmersionResult(bool(ranks) and all(r == sys.k for r in ranks), ranks, sys.k)


def structure_matrix(sys: SystemDefinition, x) -> np.ndarray:
    """``s_ij = {H_i, H_j}`` at ``x``, i.e. ``G W G^T`` with ``G = dH``."""
    G = sys.integral_jacobian(x)
    s = G @ sys.bivector_at(x) @ G.T
    return 0.5 * (s - s.T)


@dataclass
class StructureMatrixReport:
    k: int
    points: np.ndarray
    matrices: list[np.ndarray]
    ranks: list[int]
    degenerate: list[int] = field(default_factory=list)

    @property
    def generic_rank(self) -> int:
        return max(self.ranks, default=0)

    @property
    def corank(self) -> int:
        return self.k - self.generic_rank

    def to_dict(self):
        return {"k": self.k, "points": len(self.ranks), "ranks": self.ranks,
                "generic_rank": self.generic_rank, "corank": self.corank,
                "degenerate_points": self.degenerate,
                "max_antisymmetry_defect": max(
                    (float(np.max(np.abs(s + s.T))) for s in self.matrices), default=0.0)}


def structure_matrix_report(sys: SystemDefinition, points) -> StructureMatrixReport:
    points = np.asarray(points, dtype=float)
    mats = [structure_matrix(sys, x) for x in points]
    ranks = [numeric_rank(s, RANK_TOL) if np.any(s) else 0 for s in mats]
    top = max(ranks, default=0)
    degenerate = [i for i, r in enumerate(ranks) if r < top]
    if degenerate:
        log.warning("%d sample points have a rank-deficient structure matrix; excluded", len(degenerate))
    return StructureMatrixReport(sys.k, points, mats, ranks, degenerate)


def corank(report: StructureMatrixReport, n: int) -> tuple[int, bool]:
    """``m = k - generic rank``; passes iff ``m = 2n - k`` off the degenerate points."""
    m = report.corank
    regular = [r for i, r in enumerate(report.ranks) if i not in set(report.degenerate)]
    constant = len(set(regular)) <= 1
    return m, bool(report.ranks) and constant and m == 2 * n - report.k


@dataclass
class DriftResult:
    passed: bool
    max_drift: float
    tolerance: float
    per_point: list[float]
    escaped: list[dict] = field(default_factory=list)

    def to_dict(self):
        return {"pass": self.passed, "max_drift": self.max_drift, "tolerance": self.tolerance,
                "per_point": self.per_point, "escaped": self.escaped}


def _fiber_samples(fields, x0, times, flow_tol, on_escape, escaped, index):
    """Yield points on the fiber through ``x0`` reached by each pullback flow."""
    t_end = max(times)
    for a, fld in enumerate(fields):
        try:
            traj = integrate_flow(lambda x, f=fld: _field_at(f, x), x0, t_end, flow_tol)
        except (FlowEscapedChart, StepUnderflow) as exc:
            if on_escape == "raise":
                raise
            escaped.append({"point": index, "field": a + 1, "time": exc.time})
            continue
        for t in times:
            yield traj.at(t)


def _drift_check(sys, base_points, quantity, times, tol, flow_tol, on_escape, casimirs=None):
    fields = casimir_pullback_fields(sys, casimirs)
    per_point, escaped = [], []
    for i, x0 in enumerate(np.asarray(base_points, dtype=float)):
        ref = quantity(x0)
        worst = 0.0
        for x in _fiber_samples(fields, x0, times, flow_tol, on_escape, escaped, i):
            try:
                worst = max(worst, float(np.max(np.abs(quantity(x) - ref), initial=0.0)))
            except DomainError:
                if on_escape == "raise":
                    raise
                escaped.append({"point": i, "field": None, "time": None})
        per_point.append(worst)
    top = max(per_point, default=0.0)
    return DriftResult(bool(per_point) and top < tol and not escaped, top, tol, per_point, escaped)


def check_closure(sys: SystemDefinition, base_points, times: Sequence[float] = DEFAULT_FLOW_TIMES,
                  tol: float = 1e-6, *, flow_tol: float = 1e-10, on_escape: str = "raise") -> DriftResult:
    """Variation of ``s_ij`` along the Casimir pullback flows through each base point.

    ``on_escape="record"`` lists flows that leave the chart instead of raising.
    """
    return _drift_check(sys, base_points, lambda x: structure_matrix(sys, x), times, tol,
                        flow_tol, on_escape)


def coinduced_bracket_check(sys: SystemDefinition, pairs, points,
                            times: Sequence[float] = DEFAULT_FLOW_TIMES, tol: float = 1e-6, *,
                            flow_tol: float = 1e-10, on_escape: str = "raise") -> DriftResult:
    """Fiber variation of ``{f o H, g o H}`` for base functions ``f, g`` in ``x1..xk``."""
    names = sys.coalgebra_names
    grads = []
    for f, g in pairs:
        f, g = ex.as_expr(f), ex.as_expr(g)
        grads.append((ex.compile_many([ex.differentiate(f, v) for v in names], names),
                      ex.compile_many([ex.differentiate(g, v) for v in names], names)))

    def values(x):
        h = list(sys.integral_values(x))
        s = structure_matrix(sys, x)
        return np.array([np.array(df(h)) @ s @ np.array(dg(h)) for df, dg in grads])
    return _drift_check(sys, points, values, times, tol, flow_tol, on_escape)


@dataclass
class MaxResult:
    passed: bool
    max_value: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"pass": self.passed, "max_value": self.max_value, "tolerance": self.tolerance, **self.detail}


def check_isotropy(sys: SystemDefinition, points, tol: float = 1e-8, *, casimirs=None) -> MaxResult:
    """``max |Omega(v_a, v_b)|`` over pairs of Casimir pullback fields."""
    fields = casimir_pullback_fields(sys, casimirs)
    pairs = list(itertools.combinations(range(len(fields)), 2))
    worst = 0.0
    for x in points:
        if not pairs:
            break
        omega = sys.omega_at(x)
        vs = [_field_at(f, x) for f in fields]
        for a, b in pairs:
            worst = max(worst, abs(float(vs[a] @ omega @ vs[b])))
    return MaxResult(worst < tol, worst, tol, {"pairs": len(pairs)})


def check_fiber_invariance(sys: SystemDefinition, points, tol: float = 1e-9, *, casimirs=None) -> MaxResult:
    """``max |v_a(H_i)|``: each Casimir pullback field must be tangent to the fibers."""
    fields = casimir_pullback_fields(sys, casimirs)
    worst = 0.0
    for x in points:
        G = sys.integral_jacobian(x)
        for f in fields:
            worst = max(worst, float(np.max(np.abs(G @ _field_at(f, x)))))
    return MaxResult(worst < tol, worst, tol)


def _jacobiator_exprs(P: PoissonStructure):
    """Components ``[W, W]^{ijl}`` for ``i < j < l`` (cyclic sum of ``W^{ia} d_a W^{jl}``)."""
    dim = P.dim
    dW = {(i, j, a): ex.differentiate(P.entry(i, j), P.coords[a])
          for i in range(dim) for j in range(dim) for a in range(dim)}
    out = []
    for i, j, l in itertools.combinations(range(dim), 3):
        acc = ex.ZERO
        for a, b, c in ((i, j, l), (j, l, i), (l, i, j)):
            for d in range(dim):
                w, g = P.entry(a, d), dW[(b, c, d)]
                if w != ex.ZERO and g != ex.ZERO:
                    acc = acc + w * g
        out.append(ex.fold_constants(acc))
    return out


def _closedness_exprs(S: SymplecticForm):
    dim = S.dim
    out = []
    for i, j, l in itertools.combinations(range(dim), 3):
        acc = (ex.differentiate(S.entry(j, l), S.coords[i]) + ex.differentiate(S.entry(l, i), S.coords[j])
               + ex.differentiate(S.entry(i, j), S.coords[l]))
        out.append(ex.fold_constants(acc))
    return out


def check_structure(sys: SystemDefinition, points, tol: float = 1e-8) -> MaxResult:
    """Jacobi identity of a bivector, or closedness of a symplectic form, at samples."""
    S = sys.structure
    if isinstance(S, PoissonStructure):
        exprs, what = _jacobiator_exprs(S), "jacobi"
    else:
        exprs, what = _closedness_exprs(S), "closedness"
    if not exprs:
        return MaxResult(True, 0.0, tol, {"identity": what})
    fn = ex.compile_many(exprs, sys.coords)
    worst = max((max(abs(v) for v in fn(list(x))) for x in points), default=0.0)
    return MaxResult(bool(worst < tol), float(worst), tol, {"identity": what})


def completeness_advisory(sys: SystemDefinition, points, horizon: float = 10.0, *,
                          flow_tol: float = 1e-8) -> dict:
    """Integrate each ``X_{H_i}`` to ``horizon``; flows leaving the chart are listed."""
    escapes = []
    for i in range(1, sys.k + 1):
        fld = sys.integral_field(i)
        for p, x in enumerate(points):
            try:
                integrate_flow(lambda z, f=fld: _field_at(f, z), x, horizon, flow_tol)
            except (FlowEscapedChart, StepUnderflow) as exc:
                escapes.append({"integral": i, "point": p, "time": exc.time})
    verdict = "no incompleteness detected" if not escapes else "flows left the chart before the horizon"
    return {"advisory": True, "horizon": horizon, "points": len(points), "verdict": verdict,
            "escapes": escapes}


# ---------------------------------------------------------------------------
# aggregate report

@dataclass
class HypothesisReport:
    system: str
    n: int
    k: int
    m: int
    seed: int
    points_requested: int
    points_used: int
    excised: list[int]
    submersion: SubmersionResult
    structure_matrix: StructureMatrixReport
    corank_pass: bool
    closure: DriftResult
    isotropy: MaxResult
    fiber_invariance: MaxResult
    structure: MaxResult
    completeness: dict
    assumptions: list[str]

    @property
    def passed(self) -> bool:
        return all((self.submersion.passed, self.corank_pass, self.closure.passed,
                    self.isotropy.passed, self.fiber_invariance.passed, self.structure.passed))

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "pass": self.passed,
            "n": self.n, "k": self.k, "m": self.m,
            "seed": self.seed,
            "points": {"requested": self.points_requested, "used": self.points_used,
                       "excised": self.excised},
            "checks": {
                "structure": self.structure.to_dict(),
                "submersion": self.submersion.to_dict(),
                "closure": self.closure.to_dict(),
                "corank": {"pass": self.corank_pass, "m": self.m, "expected": 2 * self.n - self.k,
                           **self.structure_matrix.to_dict()},
                "isotropy": self.isotropy.to_dict(),
                "fiber_invariance": self.fiber_invariance.to_dict(),
                "completeness": self.completeness,
            },
            "assumptions": self.assumptions,
        }


ASSUMPTIONS = [
    "fibers of H are connected and mutually diffeomorphic (not checkable from local samples)",
    "completeness of the Hamiltonian flows is advisory only",
]


def verify_hypotheses(sys: SystemDefinition, *, points: int = 50, seed: int = 0,
                      tol_closure: float = 1e-6, tol_isotropy: float = 1e-8,
                      tol_invariance: float = 1e-9, tol_structure: float = 1e-8,
                      flow_tol: float = 1e-10, flow_times: Sequence[float] = DEFAULT_FLOW_TIMES,
                      completeness_points: int = 3, completeness_horizon: float = 10.0) -> HypothesisReport:
    """Run every hypothesis check on ``points`` seeded samples of the system's box."""
    if sys.n is None:
        raise ValidationError("hypothesis checks need a symplectic chart; declare n")
    if not sys.casimirs:
        raise MissingCasimirs(f"system {sys.name!r} declares no Casimir functions")
    raw = sys.sample_points(points, seed)
    keep, excised = [], []
    for i, x in enumerate(raw):
        try:
            sys.integral_values(x)
            sys.integral_jacobian(x)
            sys.omega_at(x)
            for C in sys.casimirs:
                ex.evaluate(sys.compose(C), sys.point(x))
        except (DomainError, ValueError):
            excised.append(i)
            continue
        keep.append(x)
    if excised:
        log.warning("excised %d sample points outside the chart domain", len(excised))
    pts = np.array(keep).reshape(-1, sys.dim)
    smr = structure_matrix_report(sys, pts)
    m, corank_ok = corank(smr, sys.n)
    return HypothesisReport(
        system=sys.name, n=sys.n, k=sys.k, m=m, seed=seed, points_requested=points,
        points_used=len(pts), excised=excised,
        submersion=check_submersion(sys, pts),
        structure_matrix=smr,
        corank_pass=corank_ok,
        closure=check_closure(sys, pts, flow_times, tol_closure, flow_tol=flow_tol, on_escape="record"),
        isotropy=check_isotropy(sys, pts, tol_isotropy),
        fiber_invariance=check_fiber_invariance(sys, pts, tol_invariance),
        structure=check_structure(sys, pts, tol_structure),
        completeness=completeness_advisory(sys, pts[:completeness_points], completeness_horizon),
        assumptions=list(ASSUMPTIONS),
    )
