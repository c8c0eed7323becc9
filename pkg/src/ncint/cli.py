"""Command-line front end: ``ncint verify | bracket | flow | classify``.

Exit codes: 0 success, 1 a check failed (or a flow left its chart),
2 the input could not be parsed or validated.
"""
from __future__ import annotations

import argparse
import logging
import sys as _sys
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import (DomainError, FixedPoint, MissingCasimirs, NcintError, ParseError,
                     StepUnderflow, UnboundVariable, ValidationError)
from .flows import classify_fiber, integrate_flow, invariant_drift
from .integrability import casimir_pullback_fields, verify_hypotheses
from .poisson import bracket
from .report import dumps
from .systems import BUILTINS, builtin, load_system

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

INPUT_ERRORS = (ParseError, ValidationError, MissingCasimirs, UnboundVariable, OSError)


@dataclass
class RunConfig:
    system: str | None
    builtin: str | None
    seed: int = 0
    points: int = 50
    tol_closure: float = 1e-6
    tol_isotropy: float = 1e-8
    tol_flow: float = 1e-10
    t_max: float = 100.0
    eps: float = 1e-4
    out: str | None = None
    fmt: str = "json"

    def __post_init__(self):
        if self.points < 1:
            raise ValidationError("--points must be at least 1")
        for name in ("tol_closure", "tol_isotropy", "tol_flow", "eps", "t_max"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"--{name.replace('_', '-')} must be positive")
        if self.seed < 0:
            raise ValidationError("--seed must be an unsigned integer")

    def load(self):
        if self.system:
            return load_system(self.system)
        if self.builtin:
            return builtin(self.builtin)
        raise ValidationError("give --system PATH or --builtin NAME")


def _common(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--system", metavar="PATH", help="system definition file")
    src.add_argument("--builtin", metavar="NAME", help=f"built-in system: {', '.join(BUILTINS)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--tol-closure", type=float, default=1e-6)
    p.add_argument("--tol-isotropy", type=float, default=1e-8)
    p.add_argument("--tol-flow", type=float, default=1e-10)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("json", "csv"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncint", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check the integrability hypotheses on sampled points")
    _common(p)

    p = sub.add_parser("bracket", help="Poisson bracket of two functions")
    _common(p)
    p.add_argument("f", help="expression, coordinate, H<i> or C<i>")
    p.add_argument("g", help="expression, coordinate, H<i> or C<i>")

    p = sub.add_parser("flow", help="integrate a vector field and write a CSV trajectory")
    _common(p)
    p.add_argument("--field", required=True,
                   help="integral:<i> | casimir:<i> | hamiltonian:<expr in chart coords> | "
                        "action:<expr in x1..xk>")
    p.add_argument("--x0", required=True, help="comma-separated initial point")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--spacing", type=float, default=None, help="output sample spacing")

    p = sub.add_parser("classify", help="classify the invariant fiber through a point")
    _common(p)
    p.add_argument("--x0", help="comma-separated point (default: first seeded sample)")
    p.add_argument("--bound", type=int, default=2, help="integer-combination search bound")
    return parser


def _config(args) -> RunConfig:
    return RunConfig(system=args.system, builtin=args.builtin, seed=args.seed, points=args.points,
                     tol_closure=args.tol_closure, tol_isotropy=args.tol_isotropy,
                     tol_flow=args.tol_flow, t_max=args.t_max, eps=args.eps, out=args.out,
                     fmt=args.format or ("csv" if args.command == "flow" else "json"))


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)


def _parse_x0(text: str, dim: int) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"--x0 must be comma-separated numbers, got {text!r}") from None
    if len(vals) != dim:
        raise ValidationError(f"--x0 needs {dim} values, got {len(vals)}")
    return np.array(vals)


def _resolve(system, token: str) -> ex.Expression:
    if token[:1] in "HC" and token[1:].isdigit():
        i = int(token[1:])
        pool = system.integrals if token[0] == "H" else system.casimirs
        if not 1 <= i <= len(pool):
            raise ValidationError(f"{token} is not defined for {system.name}")
        return pool[i - 1] if token[0] == "H" else system.compose(pool[i - 1])
    return ex.parse(token)


def cmd_verify(cfg: RunConfig) -> int:
    system = cfg.load()
    report = verify_hypotheses(system, points=cfg.points, seed=cfg.seed, tol_closure=cfg.tol_closure,
                               tol_isotropy=cfg.tol_isotropy, flow_tol=cfg.tol_flow)
    _emit(dumps(report.to_dict()), cfg.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_bracket(cfg: RunConfig, f: str, g: str) -> int:
    system = cfg.load()
    fe, ge = _resolve(system, f), _resolve(system, g)
    pts = system.sample_points(5, cfg.seed)
    if system.poisson is None:
        raise ValidationError("symbolic brackets need a bivector or a constant symplectic form")
    b = bracket(fe, ge, system.poisson)
    fn = ex.compile_expr(b, system.coords)
    samples = []
    for x in pts:
        try:
            value = fn(list(x))
        except DomainError:
            value = None
        samples.append({"point": dict(zip(system.coords, map(float, x))), "value": value})
    if cfg.fmt == "json":
        _emit(dumps({"expression": str(b), "samples": samples}), cfg.out)
    else:
        lines = [str(b)]
        for s in samples:
            coords = ",".join(f"{k}={format(v, '.17g')}" for k, v in s["point"].items())
            val = "undefined" if s["value"] is None else format(s["value"], ".17g")
            lines.append(f"{coords}\t{val}")
        _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK


def _select_field(system, selector: str):
    kind, _, arg = selector.partition(":")
    if kind == "integral":
        return system.integral_field(int(arg))
    if kind == "casimir":
        fields = casimir_pullback_fields(system)
        i = int(arg)
        if not 1 <= i <= len(fields):
            raise ValidationError(f"casimir:{i} out of range 1..{len(fields)}")
        return fields[i - 1]
    if kind == "hamiltonian":
        return system.hamiltonian_field(ex.parse(arg))
    if kind == "action":
        return system.hamiltonian_field(system.compose(ex.parse(arg)))
    raise ValidationError(f"unknown field selector {selector!r}")


def cmd_flow(cfg: RunConfig, selector: str, x0: str, t_end: float, spacing: float | None) -> int:
    system = cfg.load()
    field = _select_field(system, selector)
    start = _parse_x0(x0, system.dim)
    traj = integrate_flow(field, start, t_end, cfg.tol_flow, max_spacing=spacing, coords=system.coords)
    drift = invariant_drift(traj, system.integrals)
    _emit(traj.to_csv(), cfg.out)
    summary = {"drift": {f"H{i}": d for i, d in enumerate(drift, 1)}, "stats": traj.stats}
    _sys.stderr.write(dumps(summary))
    return EXIT_OK


def cmd_classify(cfg: RunConfig, x0: str | None, bound: int) -> int:
    system = cfg.load()
    start = _parse_x0(x0, system.dim) if x0 else system.sample_points(1, cfg.seed)[0]
    report = classify_fiber(system, start, cfg.t_max, cfg.eps, tol=cfg.tol_flow, bound=bound)
    out = {"system": system.name, "x0": [float(v) for v in start], **report.to_dict()}
    _emit(dumps(out), cfg.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "bracket":
            return cmd_bracket(cfg, args.f, args.g)
        if args.command == "flow":
            return cmd_flow(cfg, args.field, args.x0, args.t_end, args.spacing)
        return cmd_classify(cfg, args.x0, args.bound)
    except INPUT_ERRORS as exc:
        print(f"ncint: input error: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    except (DomainError, StepUnderflow, FixedPoint) as exc:
        print(f"ncint: {exc}", file=_sys.stderr)
        return EXIT_FAIL
    except NcintError as exc:
        print(f"ncint: {exc}", file=_sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
