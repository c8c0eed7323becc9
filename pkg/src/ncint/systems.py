"""System definitions: file format, validation, built-in examples and
Darboux-chart verification.

A system lives on one coordinate chart of dimension ``2n`` and carries
exactly one structure (a Poisson bivector or a symplectic form), the
integrals ``H1..Hk`` and optionally Casimir functions ``C1..Cm`` written in
the reserved coalgebra variables ``x1..xk``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import DegenerateForm, ParseError, SingularChart, ValidationError
from .expr import Expression
from .flows import integrate_flow, invariant_drift
from .lie_poisson import lie_poisson_bivector, so21 as so21_algebra
from .poisson import (PoissonStructure, SymplecticForm, VectorField, chart_jacobian,
                      hamiltonian_vector_field, invert_symplectic, numeric_rank)

__all__ = [
    "SystemDefinition", "DarbouxChart", "parse_system_file", "load_system", "serialize_system",
    "builtin", "builtin_so21", "builtin_so21_coalgebra", "builtin_so21_cartesian",
    "BUILTINS", "verify_darboux", "action_hamiltonian_check", "so21_darboux_chart",
]

KINDS = ("linear", "angle")


def _coalgebra_names(k: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(k))


@dataclass(frozen=True)
class SystemDefinition:
    name: str
    coords: tuple[str, ...]
    kinds: tuple[str, ...]
    structure: PoissonStructure | SymplecticForm
    integrals: tuple[Expression, ...]
    casimirs: tuple[Expression, ...] = ()
    box: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    n: int | None = None
    m: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "integrals", tuple(ex.as_expr(h) for h in self.integrals))
        object.__setattr__(self, "casimirs", tuple(ex.as_expr(c) for c in self.casimirs))
        object.__setattr__(self, "box", {c: (float(lo), float(hi)) for c, (lo, hi) in dict(self.box).items()})
        if self.m is None and self.casimirs:
            object.__setattr__(self, "m", len(self.casimirs))
        self.validate()

    # -- validation --------------------------------------------------------
    def validate(self):
        coords = self.coords
        if len(set(coords)) != len(coords):
            raise ValidationError("duplicate coordinate names")
        if len(self.kinds) != len(coords) or any(k not in KINDS for k in self.kinds):
            raise ValidationError("every coordinate needs a kind: linear or angle")
        if self.structure.coords != coords:
            raise ValidationError("structure is written in different coordinates")
        dim, k = len(coords), self.k
        if k == 0:
            raise ValidationError("at least one integral is required")
        if isinstance(self.structure, SymplecticForm) and self.n is None:
            raise ValidationError("a symplectic form requires the declared n")
        if self.n is not None:
            if dim != 2 * self.n:
                raise ValidationError(f"chart dimension {dim} differs from 2n = {2 * self.n}")
            if k > 2 * self.n:
                raise ValidationError(f"k = {k} exceeds 2n = {2 * self.n}")
        for i, h in enumerate(self.integrals, 1):
            extra = ex.variables(h) - set(coords)
            if extra:
                raise ValidationError(f"H{i} uses unbound variable {sorted(extra)[0]!r}")
        allowed = set(_coalgebra_names(k))
        for i, c in enumerate(self.casimirs, 1):
            extra = ex.variables(c) - allowed
            if extra:
                raise ValidationError(f"C{i} uses {sorted(extra)[0]!r}; Casimirs use x1..x{k}")
        if self.casimirs and self.m is not None and len(self.casimirs) != self.m:
            raise ValidationError(f"{len(self.casimirs)} Casimirs given but m = {self.m}")
        for c in coords:
            if c not in self.box:
                raise ValidationError(f"no sampling interval for coordinate {c!r}")
            lo, hi = self.box[c]
            if not lo < hi:
                raise ValidationError(f"empty sampling interval for {c!r}")
        unknown = set(self.box) - set(coords)
        if unknown:
            raise ValidationError(f"sampling interval for unknown coordinate {sorted(unknown)[0]!r}")

    # -- basic properties --------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def k(self) -> int:
        return len(self.integrals)

    @property
    def coalgebra_names(self) -> tuple[str, ...]:
        return _coalgebra_names(self.k)

    def angle_mask(self) -> np.ndarray:
        return np.array([kind == "angle" for kind in self.kinds])

    def point(self, values) -> dict[str, float]:
        return dict(zip(self.coords, map(float, values)))

    def sample_points(self, count: int = 50, seed: int = 0) -> np.ndarray:
        """Uniform points in the sampling box from a seeded generator."""
        rng = np.random.default_rng(seed)
        lo = np.array([self.box[c][0] for c in self.coords])
        hi = np.array([self.box[c][1] for c in self.coords])
        return lo + (hi - lo) * rng.random((count, self.dim))

    # -- structures --------------------------------------------------------
    @cached_property
    def poisson(self) -> PoissonStructure | None:
        """Symbolic bivector when available (bivector systems, constant forms)."""
        if isinstance(self.structure, PoissonStructure):
            return self.structure
        if self.structure.is_constant():
            return self.structure.to_poisson()
        return None

    def bivector_at(self, x) -> np.ndarray:
        if isinstance(self.structure, PoissonStructure):
            return self.structure.evaluate(x)
        return invert_symplectic(self.structure, x)

    def omega_at(self, x) -> np.ndarray:
        """Symplectic form at ``x``; the bivector is inverted when needed."""
        if isinstance(self.structure, SymplecticForm):
            return self.structure.evaluate(x)
        W = self.structure.evaluate(x)
        if abs(np.linalg.det(W)) < 1e-12:
            raise DegenerateForm("bivector is degenerate at the given point")
        return -np.linalg.inv(W)

    @cached_property
    def _integral_fns(self):
        grads = [ex.differentiate(h, c) for h in self.integrals for c in self.coords]
        return (ex.compile_many(self.integrals, self.coords),
                ex.compile_many(grads, self.coords))

    def integral_values(self, x) -> np.ndarray:
        return np.array(self._integral_fns[0](list(map(float, x))))

    def integral_jacobian(self, x) -> np.ndarray:
        """``k x 2n`` matrix of partial derivatives ``dH_i/dz_j``."""
        flat = self._integral_fns[1](list(map(float, x)))
        return np.array(flat).reshape(self.k, self.dim)

    def compose(self, f) -> Expression:
        """``f(x1..xk)`` composed with the integral map."""
        return ex.substitute(ex.as_expr(f), dict(zip(self.coalgebra_names, self.integrals)))

    def hamiltonian_field(self, H):
        """Hamiltonian field of a chart function; symbolic when a bivector is available."""
        H = ex.as_expr(H)
        if self.poisson is not None:
            return hamiltonian_vector_field(H, self.poisson)
        grad = ex.compile_many([ex.differentiate(H, c) for c in self.coords], self.coords)

        def field_at(x):
            return self.bivector_at(x).T @ np.array(grad(list(map(float, x))))
        return field_at

    def integral_field(self, i: int):
        """Hamiltonian field of ``H_i`` (1-based)."""
        return self.hamiltonian_field(self.integrals[i - 1])

    def to_text(self) -> str:
        return serialize_system(self)


# ---------------------------------------------------------------------------
# file format

_SECTIONS = ("system", "coordinates", "structure", "integrals", "casimirs", "sampling")
_KEYVAL = re.compile(r"^\s*([^=]+?)\s*=\s*(.*?)\s*$")
_ENTRY = re.compile(r"^(?:W|Omega)\[\s*(\d+)\s*,\s*(\d+)\s*\]$")
_INDEXED = re.compile(r"^([HC])(\d+)$")
_COORD = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*:\s*([A-Za-z]+)\s*$")
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_INTERVAL = re.compile(rf"^\s*([A-Za-z_][A-Za-z_0-9]*)\s+in\s+\[\s*({_NUM})\s*,\s*({_NUM})\s*\]\s*$")


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_system_file(text: str) -> SystemDefinition:
    """Parse and validate the line-oriented system format.

    Raises ParseError (with line/column) for malformed text and
    ValidationError for well-formed but inconsistent definitions.
    """
    section = None
    meta: dict[str, str] = {}
    coords: list[str] = []
    kinds: list[str] = []
    kind = None
    entries: list[tuple[int, int, Expression, int]] = []
    integrals: dict[int, Expression] = {}
    casimirs: dict[int, Expression] = {}
    box: dict[str, tuple[float, float]] = {}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            m = re.fullmatch(r"\[\s*([a-z]+)\s*\]", stripped)
            if not m or m.group(1) not in _SECTIONS:
                raise ParseError(f"unknown section header {stripped!r}", lineno, line.find("[") + 1)
            section = m.group(1)
            continue
        if section is None:
            raise ParseError("content before the first section header", lineno, 1)
        if section == "coordinates":
            m = _COORD.match(line)
            if not m:
                raise ParseError("expected '<name> : linear|angle'", lineno, 1)
            if m.group(2) not in KINDS:
                raise ParseError(f"unknown coordinate kind {m.group(2)!r}", lineno, m.start(2) + 1)
            coords.append(m.group(1))
            kinds.append(m.group(2))
            continue
        if section == "sampling":
            m = _INTERVAL.match(line)
            if not m:
                raise ParseError("expected '<coord> in [<lo>, <hi>]'", lineno, 1)
            if m.group(1) in box:
                raise ValidationError(f"line {lineno}: duplicate interval for {m.group(1)!r}")
            box[m.group(1)] = (float(m.group(2)), float(m.group(3)))
            continue
        m = _KEYVAL.match(line)
        if not m:
            raise ParseError("expected '<key> = <value>'", lineno, 1)
        key, value = m.group(1), m.group(2)
        vcol = m.start(2)
        if section == "system":
            if key not in ("name", "n", "k", "m"):
                raise ParseError(f"unknown key {key!r} in [system]", lineno, m.start(1) + 1)
            meta[key] = value
        elif section == "structure":
            if key == "kind":
                if value not in ("bivector", "symplectic"):
                    raise ParseError(f"unknown structure kind {value!r}", lineno, vcol + 1)
                kind = value
                continue
            em = _ENTRY.match(key)
            if not em:
                raise ParseError(f"expected W[i,j] entry, got {key!r}", lineno, m.start(1) + 1)
            entries.append((int(em.group(1)), int(em.group(2)),
                            ex.parse(value, line=lineno, column=vcol), lineno))
        else:
            im = _INDEXED.match(key)
            want = "H" if section == "integrals" else "C"
            if not im or im.group(1) != want:
                raise ParseError(f"expected {want}<index> in [{section}]", lineno, m.start(1) + 1)
            target = integrals if want == "H" else casimirs
            idx = int(im.group(2))
            if idx in target:
                raise ValidationError(f"line {lineno}: duplicate {key}")
            target[idx] = ex.parse(value, line=lineno, column=vcol)

    def meta_int(key):
        if key not in meta:
            return None
        try:
            return int(meta[key])
        except ValueError:
            raise ValidationError(f"[system] {key} must be an integer") from None

    if kind is None:
        raise ValidationError("[structure] needs kind = bivector|symplectic")
    if not coords:
        raise ValidationError("no coordinates declared")
    dim = len(coords)
    upper = {}
    for i, j, e, lineno in entries:
        if not (1 <= i < j <= dim):
            raise ValidationError(f"line {lineno}: entry W[{i},{j}] must satisfy 1 <= i < j <= {dim}")
        if (i - 1, j - 1) in upper:
            raise ValidationError(f"line {lineno}: duplicate entry W[{i},{j}]")
        upper[(i - 1, j - 1)] = e
    for e, _ in ((e, ln) for _, _, e, ln in entries):
        extra = ex.variables(e) - set(coords)
        if extra:
            raise ValidationError(f"structure entry uses unbound variable {sorted(extra)[0]!r}")
    if kind == "symplectic":
        if dim % 2:
            raise ValidationError("symplectic form on an odd-dimensional chart")
        structure = SymplecticForm(coords, upper)
    else:
        structure = PoissonStructure(coords, upper)

    def ordered(d, label):
        if sorted(d) != list(range(1, len(d) + 1)):
            raise ValidationError(f"{label} indices must be 1..{len(d)} without gaps")
        return [d[i] for i in range(1, len(d) + 1)]

    H = ordered(integrals, "integral")
    C = ordered(casimirs, "Casimir")
    k_decl = meta_int("k")
    if k_decl is not None and k_decl != len(H):
        raise ValidationError(f"declared k = {k_decl} but {len(H)} integrals given")
    return SystemDefinition(
        name=meta.get("name", "unnamed"), coords=coords, kinds=kinds, structure=structure,
        integrals=H, casimirs=C, box=box, n=meta_int("n"), m=meta_int("m"),
    )


def _num(v: float) -> str:
    return ex._fmt_number(float(v))


def serialize_system(sys: SystemDefinition) -> str:
    """Canonical text form; ``parse_system_file`` of it reproduces ``sys``."""
    out = ["[system]", f"name = {sys.name}"]
    if sys.n is not None:
        out.append(f"n = {sys.n}")
    out.append(f"k = {sys.k}")
    if sys.m is not None:
        out.append(f"m = {sys.m}")
    out += ["", "[coordinates]"]
    out += [f"{c} : {kind}" for c, kind in zip(sys.coords, sys.kinds)]
    kind = "symplectic" if isinstance(sys.structure, SymplecticForm) else "bivector"
    out += ["", "[structure]", f"kind = {kind}"]
    out += [f"W[{i + 1},{j + 1}] = {e}" for (i, j), e in sorted(sys.structure.upper.items())]
    out += ["", "[integrals]"]
    out += [f"H{i} = {h}" for i, h in enumerate(sys.integrals, 1)]
    if sys.casimirs:
        out += ["", "[casimirs]"]
        out += [f"C{i} = {c}" for i, c in enumerate(sys.casimirs, 1)]
    out += ["", "[sampling]"]
    out += [f"{c} in [{_num(sys.box[c][0])}, {_num(sys.box[c][1])}]" for c in sys.coords]
    return "\n".join(out) + "\n"


def load_system(path) -> SystemDefinition:
    with open(path, encoding="utf-8") as fh:
        return parse_system_file(fh.read())


def shipped_file(name: str) -> str:
    """Text of a system file shipped with the package (e.g. ``so21.system``)."""
    return resources.files("ncint.data").joinpath(name).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# built-in systems

SO21_CASIMIR = "sqrt(x1^2 + x2^2 - x3^2)"


def builtin_so21() -> SystemDefinition:
    """so(2,1) integrals on the action-angle chart ``(r, y, gamma, x1)``.

    ``W = d_r^d_y + d_gamma^d_x1``; ``H1 = x1``,
    ``H2 = sqrt(r^2 - x1^2) cosh(gamma)``, ``H3 = sqrt(r^2 - x1^2) sinh(gamma)``.
    """
    coords = ("r", "y", "gamma", "x1")
    W = PoissonStructure.from_wedges(coords, [(1, "r", "y"), (1, "gamma", "x1")])
    rho = ex.sqrt(ex.Var("r") ** 2 - ex.Var("x1") ** 2)
    H = (ex.Var("x1"), rho * ex.cosh(ex.Var("gamma")), rho * ex.sinh(ex.Var("gamma")))
    return SystemDefinition(
        name="so21", coords=coords, kinds=("linear",) * 4, structure=W, integrals=H,
        casimirs=(ex.parse(SO21_CASIMIR),),
        box={"r": (1, 3), "y": (-1, 1), "gamma": (-1, 1), "x1": (-0.5, 0.5)}, n=2, m=1,
    )


_COALGEBRA_BOX = {"x1": (-0.5, 0.5), "x2": (2, 3), "x3": (-1, 1)}


def builtin_so21_coalgebra() -> SystemDefinition:
    """Lie-Poisson structure of so(2,1) on its coalgebra (odd-dimensional, no n)."""
    W = lie_poisson_bivector(so21_algebra())
    xs = [ex.Var(c) for c in W.coords]
    return SystemDefinition(
        name="so21-coalgebra", coords=W.coords, kinds=("linear",) * 3, structure=W,
        integrals=xs, casimirs=(ex.parse(SO21_CASIMIR),), box=dict(_COALGEBRA_BOX), n=None, m=1,
    )


def so21_cartesian_structure(flip_sign: bool = False) -> PoissonStructure:
    """The symplectic structure of the so(2,1) example in coordinates ``(x1, x2, x3, y)``.

    The coalgebra block is Lie-Poisson and ``{x_i, y} = dH_i/dr``.  With
    ``flip_sign`` the ``x3-x1`` coalgebra entry changes sign, which breaks
    the Jacobi identity.
    """
    coords = ("x1", "x2", "x3", "y")
    x1, x2, x3 = (ex.Var(c) for c in coords[:3])
    r = ex.parse(SO21_CASIMIR)
    rho2 = x2 ** 2 - x3 ** 2
    s = -1.0 if flip_sign else 1.0
    return PoissonStructure.from_wedges(coords, [
        (x2 * s, "x3", "x1"), (-x3, "x1", "x2"), (x1, "x2", "x3"),
        (r * x2 / rho2, "x2", "y"), (r * x3 / rho2, "x3", "y"),
    ])


def builtin_so21_cartesian(flip_sign: bool = False) -> SystemDefinition:
    W = so21_cartesian_structure(flip_sign)
    return SystemDefinition(
        name="so21-corrupted" if flip_sign else "so21-cartesian", coords=W.coords,
        kinds=("linear",) * 4, structure=W, integrals=[ex.Var(c) for c in W.coords[:3]],
        casimirs=(ex.parse(SO21_CASIMIR),), box=dict(_COALGEBRA_BOX, y=(-1, 1)), n=2, m=1,
    )


def builtin_so21_noncasimir() -> SystemDefinition:
    """so(2,1) with ``x2`` posing as the Casimir; fails the fiber-invariance check."""
    base = builtin_so21()
    return SystemDefinition(
        name="so21-noncasimir", coords=base.coords, kinds=base.kinds, structure=base.structure,
        integrals=base.integrals, casimirs=(ex.Var("x2"),), box=base.box, n=2, m=1,
    )


def builtin_oscillator() -> SystemDefinition:
    coords = ("q", "p")
    W = PoissonStructure.from_wedges(coords, [(1, "p", "q")])
    return SystemDefinition(
        name="oscillator", coords=coords, kinds=("linear",) * 2, structure=W,
        integrals=[ex.parse("(q^2 + p^2)/2")], casimirs=[ex.Var("x1")],
        box={"q": (0.5, 1.5), "p": (-0.5, 0.5)}, n=1, m=1,
    )


def builtin_free_particle() -> SystemDefinition:
    coords = ("q", "p")
    W = PoissonStructure.from_wedges(coords, [(1, "p", "q")])
    return SystemDefinition(
        name="free-particle", coords=coords, kinds=("linear",) * 2, structure=W,
        integrals=[ex.Var("p")], casimirs=[ex.Var("x1")],
        box={"q": (-1, 1), "p": (0.5, 1.5)}, n=1, m=1,
    )


def builtin_oscillator_free() -> SystemDefinition:
    """Oscillator in ``(q1, p1)`` times a free particle in ``(q2, p2)``."""
    coords = ("q1", "p1", "q2", "p2")
    W = PoissonStructure.from_wedges(coords, [(1, "p1", "q1"), (1, "p2", "q2")])
    return SystemDefinition(
        name="oscillator-free", coords=coords, kinds=("linear",) * 4, structure=W,
        integrals=[ex.parse("(q1^2 + p1^2)/2"), ex.Var("p2")],
        casimirs=[ex.Var("x1"), ex.Var("x2")],
        box={"q1": (0.5, 1.5), "p1": (-0.5, 0.5), "q2": (-1, 1), "p2": (0.5, 1.5)}, n=2, m=2,
    )


def builtin_rotor() -> SystemDefinition:
    """Free rotor with an angle coordinate; its fiber is a circle."""
    coords = ("theta", "L")
    W = PoissonStructure.from_wedges(coords, [(1, "L", "theta")])
    return SystemDefinition(
        name="rotor", coords=coords, kinds=("angle", "linear"), structure=W,
        integrals=[ex.Var("L")], casimirs=[ex.Var("x1")],
        box={"theta": (0, 6), "L": (0.5, 1.5)}, n=1, m=1,
    )


BUILTINS = {
    "so21": builtin_so21,
    "so21-coalgebra": builtin_so21_coalgebra,
    "so21-cartesian": builtin_so21_cartesian,
    "so21-corrupted": lambda: builtin_so21_cartesian(flip_sign=True),
    "so21-noncasimir": builtin_so21_noncasimir,
    "oscillator": builtin_oscillator,
    "free-particle": builtin_free_particle,
    "oscillator-free": builtin_oscillator_free,
    "rotor": builtin_rotor,
}


def builtin(name: str) -> SystemDefinition:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValidationError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}") from None


# ---------------------------------------------------------------------------
# Darboux charts

ROLES = ("action", "angle", "momentum", "position")


@dataclass(frozen=True)
class DarbouxChart:
    """New coordinates given as expressions in the system's chart.

    ``roles`` tags each new coordinate; the ``k``-th action pairs with the
    ``k``-th angle and the ``k``-th momentum with the ``k``-th position.
    """

    names: tuple[str, ...]
    forward: tuple[Expression, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "forward", tuple(ex.as_expr(e) for e in self.forward))
        object.__setattr__(self, "roles", tuple(self.roles))
        if not (len(self.names) == len(self.forward) == len(self.roles)):
            raise ValidationError("names, forward expressions and roles must have equal length")
        if any(r not in ROLES for r in self.roles):
            raise ValidationError(f"roles must be among {ROLES}")
        if self.roles.count("action") != self.roles.count("angle"):
            raise ValidationError("actions and angles must pair up")
        if self.roles.count("momentum") != self.roles.count("position"):
            raise ValidationError("momenta and positions must pair up")

    def canonical(self) -> np.ndarray:
        """Bivector ``sum d_J^d_y + sum d_p^d_q`` in the chart's coordinate order."""
        dim = len(self.names)
        out = np.zeros((dim, dim))
        for first, second in (("action", "angle"), ("momentum", "position")):
            a = [i for i, r in enumerate(self.roles) if r == first]
            b = [i for i, r in enumerate(self.roles) if r == second]
            for i, j in zip(a, b):
                out[i, j], out[j, i] = 1.0, -1.0
        return out


def so21_darboux_chart() -> DarbouxChart:
    """Identity chart on ``(r, y, gamma, x1)``: action r, angle y, momentum gamma, position x1."""
    return DarbouxChart(("r", "y", "gamma", "x1"), [ex.Var(c) for c in ("r", "y", "gamma", "x1")],
                        ("action", "angle", "momentum", "position"))


def verify_darboux(sys: SystemDefinition, chart: DarbouxChart, points) -> float:
    """Max entrywise deviation of the pushed-forward bivector from canonical form."""
    if len(chart.names) != sys.dim:
        raise ValidationError("a Darboux chart needs one new coordinate per chart dimension")
    target = chart.canonical()
    worst = 0.0
    for x in points:
        J = chart_jacobian(chart.forward, sys.coords, x)
        if numeric_rank(J) < sys.dim:
            raise SingularChart("chart Jacobian is rank deficient")
        Wp = J @ sys.bivector_at(x) @ J.T
        worst = max(worst, float(np.max(np.abs(Wp - target))))
    return worst


def action_hamiltonian_check(sys: SystemDefinition, hfn, points, horizon: float = 10.0, *,
                             tol: float = 1e-10, drift_tol: float = 1e-8,
                             chart: DarbouxChart | None = None) -> dict:
    """Integrate the flow of ``hfn(H)`` and check the action-angle equations of motion.

    The integrals must be conserved; in ``chart`` the actions, momenta and
    positions must stay constant while each angle advances linearly.
    """
    hfn = ex.as_expr(hfn)
    H = sys.compose(hfn)
    field = sys.hamiltonian_field(H)
    chart_fns = ex.compile_many(chart.forward, sys.coords) if chart else None
    per_point = []
    worst_H = worst_const = worst_lin = 0.0
    for x0 in points:
        traj = integrate_flow(field, x0, horizon, tol, coords=sys.coords)
        dH = max(invariant_drift(traj, sys.integrals))
        entry = {"x0": [float(v) for v in x0], "integral_drift": dH}
        worst_H = max(worst_H, dH)
        if chart_fns is not None:
            vals = np.array([chart_fns(list(s)) for s in traj.states])
            slopes = {}
            for col, (name, role) in enumerate(zip(chart.names, chart.roles)):
                series = vals[:, col]
                if role == "angle":
                    slope, icpt = np.polyfit(traj.times, series, 1)
                    resid = float(np.max(np.abs(series - (slope * traj.times + icpt))))
                    worst_lin = max(worst_lin, resid)
                    slopes[name] = float(slope)
                else:
                    worst_const = max(worst_const, float(np.max(np.abs(series - series[0]))))
            entry["angle_slopes"] = slopes
        per_point.append(entry)
    passed = worst_H < drift_tol and worst_const < drift_tol and worst_lin < drift_tol
    return {"pass": passed, "integral_drift": worst_H, "constant_coordinate_drift": worst_const,
            "angle_linearity_residual": worst_lin, "tolerance": drift_tol, "points": per_point}
