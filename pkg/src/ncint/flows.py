"""Flows of vector fields: adaptive integration, drift monitoring, recurrence
detection and a sampling heuristic for the topology of invariant fibers.

The integrator is the Dormand-Prince 5(4) embedded pair with its standard
fourth-order continuous extension (Shampine's coefficients, as used by
``scipy.integrate.RK45``).  Step-size control uses the max-norm of the
embedded error estimate scaled by ``tol * max(1, |y|)``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .errors import DomainError, FixedPoint, FlowEscapedChart, StepUnderflow
from .poisson import VectorField

__all__ = [
    "FlowTrajectory", "integrate_flow", "invariant_drift", "detect_period",
    "recurrence_scan", "Recurrence", "TopologyReport", "classify_fiber",
]

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

MIN_STEP = 1e-14


def _as_callable(V) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(V, VectorField):
        return V.at
    return V


@dataclass
class FlowTrajectory:
    coords: tuple[str, ...]
    times: np.ndarray
    states: np.ndarray
    stats: dict = field(default_factory=dict)
    # dense-output segments (t0, h, y0, Q) covering [times[0], times[-1]]
    _segments: list = field(default_factory=list, repr=False)

    def at(self, t: float) -> np.ndarray:
        """State at time ``t`` from the continuous extension."""
        if not self._segments:
            return self.states[0].copy()
        starts = [s[0] for s in self._segments]
        k = max(0, min(len(starts) - 1, int(np.searchsorted(starts, t, side="right")) - 1))
        t0, h, y0, Q = self._segments[k]
        theta = (t - t0) / h
        return y0 + h * (Q @ np.array([theta, theta ** 2, theta ** 3, theta ** 4]))

    def to_csv(self, stream=None) -> str:
        """Write ``t,<coords...>`` rows with 17 significant digits; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.coords])
        for t, row in zip(self.times, self.states):
            w.writerow([format(t, ".17g"), *(format(v, ".17g") for v in row)])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def integrate_flow(V, x0: Sequence[float], t_end: float, tol: float = 1e-10, *,
                   max_spacing: float | None = None, coords: Sequence[str] | None = None,
                   max_steps: int = 2_000_000) -> FlowTrajectory:
    """Integrate ``dx/dt = V(x)`` from ``x0`` over ``[0, t_end]``.

    Output is sampled on a uniform grid of spacing ``max_spacing`` (default
    ``0.01 * t_end``) and the continuous extension is kept for ``at``.
    Raises FlowEscapedChart when the field cannot be evaluated and
    StepUnderflow when the step size collapses.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    f = _as_callable(V)
    if coords is None:
        coords = V.coords if isinstance(V, VectorField) else tuple(f"z{i + 1}" for i in range(len(x0)))
    y = np.array(x0, dtype=float)
    if max_spacing is None:
        max_spacing = 0.01 * t_end if t_end > 0 else 1.0
    n_grid = int(math.ceil(t_end / max_spacing - 1e-12)) if t_end > 0 else 0
    grid = [min(k * max_spacing, t_end) for k in range(n_grid + 1)]
    if grid[-1] != t_end:
        grid.append(t_end)

    def call(x, t):
        try:
            out = np.asarray(f(x), dtype=float)
        except DomainError as exc:
            raise FlowEscapedChart(f"flow left the chart near t={t:.6g}: {exc}", time=t) from None
        if not np.all(np.isfinite(out)):
            raise FlowEscapedChart(f"non-finite field value near t={t:.6g}", time=t)
        return out

    times, states, segments = [0.0], [y.copy()], []
    stats = {"steps": 0, "rejected": 0, "nfev": 0, "max_error": 0.0}
    if t_end == 0:
        return FlowTrajectory(tuple(coords), np.array(times), np.array(states), stats, segments)

    k0 = call(y, 0.0)
    stats["nfev"] += 1
    t, gi = 0.0, 1
    h = min(max_spacing, t_end, 0.1 * tol ** 0.2 / max(float(np.max(np.abs(k0))), 1e-3))
    K = np.empty((7, y.size))
    while t < t_end:
        if stats["steps"] >= max_steps:
            raise StepUnderflow("maximum number of steps exceeded", time=t)
        h = min(h, t_end - t)
        if h < MIN_STEP * max(1.0, abs(t)):
            raise StepUnderflow(f"step size underflow at t={t:.6g}", time=t)
        K[0] = k0
        try:
            for s in range(1, 6):
                K[s] = call(y + h * (np.dot(_A[s], K[:s])), t + _C[s] * h)
            y_new = y + h * (_B @ K[:6])
            K[6] = call(y_new, t + h)
        except FlowEscapedChart as exc:
            # a stage may leave the chart even if the true orbit does not
            if h > 1e-8 * max(1.0, abs(t)):
                h *= 0.25
                stats["rejected"] += 1
                continue
            raise exc
        finally:
            stats["nfev"] += 6
        err_vec = h * (_E @ K)
        scale = tol * np.maximum(1.0, np.maximum(np.abs(y), np.abs(y_new)))
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            Q = K.T @ _P
            segments.append((t, h, y.copy(), Q))
            t_next = t + h if t + h < t_end else t_end
            while gi < len(grid) and grid[gi] <= t_next:
                tg = grid[gi]
                if tg == t_next:
                    states.append(y_new.copy())
                else:
                    theta = (tg - t) / h
                    states.append(y + h * (Q @ np.array([theta, theta ** 2, theta ** 3, theta ** 4])))
                times.append(tg)
                gi += 1
            stats["steps"] += 1
            stats["max_error"] = max(stats["max_error"], float(np.max(np.abs(err_vec))))
            t, y, k0 = t_next, y_new, K[6].copy()
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            stats["rejected"] += 1
            factor = max(0.2, 0.9 * err ** -0.2)
        h *= factor
    return FlowTrajectory(tuple(coords), np.array(times), np.array(states), stats, segments)


def invariant_drift(traj: FlowTrajectory, fns: Sequence) -> list[float]:
    """``max_t |f(x(t)) - f(x(0))|`` for each function along the samples."""
    exprs = [ex.as_expr(f) for f in fns]
    fn = ex.compile_many(exprs, traj.coords)
    ref = None
    worst = [0.0] * len(exprs)
    for t, x in zip(traj.times, traj.states):
        try:
            vals = fn(x)
        except DomainError as exc:
            raise DomainError(f"{exc} (at t={t:.17g})") from None
        if ref is None:
            ref = vals
        worst = [max(w, abs(v - r)) for w, v, r in zip(worst, vals, ref)]
    return worst


def _wrapped(diff, angles):
    if angles is None or not np.any(angles):
        return diff
    out = diff.copy()
    out[angles] = np.mod(out[angles] + math.pi, 2 * math.pi) - math.pi
    return out


@dataclass
class Recurrence:
    """Outcome of scanning one orbit for a return to its starting point."""

    period: float | None
    distance: float | None         # recurrence distance at the period
    min_distance: float            # smallest distance after leaving the eps-ball
    final_distance: float
    monotone: bool                 # distance never decreased after departure
    departed: bool

    def to_dict(self):
        return {"period": self.period, "recurrence_distance": self.distance,
                "min_distance_after_departure": self.min_distance,
                "final_distance": self.final_distance, "monotone_escape": self.monotone}


def recurrence_scan(V, x0, t_max: float = 100.0, eps: float = 1e-4, *, tol: float = 1e-10,
                    angles=None, max_spacing: float | None = None) -> Recurrence:
    """Integrate from ``x0`` and locate the first return within ``eps``.

    Local minima of the distance to ``x0`` are bracketed by sign changes of
    ``(x(t) - x0) . V(x(t))`` and refined by bisection on the continuous
    extension.  Angle coordinates (boolean mask ``angles``) are compared
    modulo 2*pi.
    """
    f = _as_callable(V)
    x0 = np.asarray(x0, dtype=float)
    if float(np.linalg.norm(f(x0))) <= 1e-10:
        raise FixedPoint("the field vanishes at the starting point")
    if angles is not None:
        angles = np.asarray(angles, dtype=bool)
    traj = integrate_flow(V, x0, t_max, tol, max_spacing=max_spacing or min(0.05, 0.01 * t_max))

    def dist_and_slope(t, x=None):
        if x is None:
            x = traj.at(t)
        d = _wrapped(x - x0, angles)
        return float(np.linalg.norm(d)), float(d @ f(x))

    ts = traj.times
    dists, slopes = zip(*(dist_and_slope(t, x) for t, x in zip(ts, traj.states)))
    dists, slopes = np.array(dists), np.array(slopes)
    out = np.nonzero(dists > eps)[0]
    if out.size == 0:
        return Recurrence(None, None, float(dists.min()), float(dists[-1]), False, False)
    start = int(out[0])
    after = dists[start:]
    monotone = bool(np.all(np.diff(after) >= -1e-12 * np.maximum(1.0, after[1:])))
    for k in range(max(start, 1), len(ts) - 1):
        if slopes[k] <= 0.0 < slopes[k + 1]:
            lo, hi = ts[k], ts[k + 1]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid == lo or mid == hi:
                    break
                if dist_and_slope(mid)[1] <= 0.0:
                    lo = mid
                else:
                    hi = mid
            t_star = 0.5 * (lo + hi)
            d_star = dist_and_slope(t_star)[0]
            if d_star < eps:
                return Recurrence(float(t_star), d_star, float(after.min()), float(dists[-1]), monotone, True)
    return Recurrence(None, None, float(after.min()), float(dists[-1]), monotone, True)


def detect_period(V, x0, t_max: float = 100.0, eps: float = 1e-4, *, tol: float = 1e-10,
                  angles=None) -> float | None:
    """Smallest return time in ``(0, t_max]`` with ``|x(t) - x0| < eps``, or None."""
    return recurrence_scan(V, x0, t_max, eps, tol=tol, angles=angles).period


# ---------------------------------------------------------------------------
# fiber topology

@dataclass
class TopologyReport:
    m: int
    r: int
    classification: str
    directions: list[dict]
    method: str = ("heuristic: recurrence search along Casimir pullback fields and "
                   "small integer combinations; absence of recurrence is evidence, not proof")

    def to_dict(self):
        return {"m": self.m, "r": self.r, "classification": self.classification,
                "method": self.method, "directions": self.directions}


def toroidal_label(m: int, r: int) -> str:
    if m == 0:
        return "point"
    parts = []
    if m - r > 0:
        parts.append(f"R^{m - r}")
    if r > 0:
        parts.append(f"T^{r}")
    return " x ".join(parts)


def _directions(m: int, bound: int):
    vecs = []
    for c in itertools.product(range(-bound, bound + 1), repeat=m):
        if not any(c):
            continue
        first = next(v for v in c if v != 0)
        if first < 0 or math.gcd(*[abs(v) for v in c]) != 1:
            continue
        vecs.append(c)
    vecs.sort(key=lambda c: (sum(map(abs, c)), [-v for v in c]))
    return vecs


def classify_fiber(sys, x0, t_max: float = 100.0, eps: float = 1e-4, *, tol: float = 1e-10,
                   bound: int = 2) -> TopologyReport:
    """Guess the type ``R^(m-r) x T^r`` of the fiber through ``x0``.

    Each primitive integer combination of the Casimir pullback fields with
    coefficients in ``[-bound, bound]`` is scanned for recurrence; ``r`` is
    the rank of the periodic combinations found.
    """
    from .integrability import casimir_pullback_fields

    fields = casimir_pullback_fields(sys)
    m = len(fields)
    x0 = np.asarray(x0, dtype=float)
    angles = sys.angle_mask()
    periodic: list[tuple[int, ...]] = []
    evidence = []
    for c in _directions(m, bound):
        def combo(x, c=c):
            return sum(ci * fld(x) for ci, fld in zip(c, fields) if ci)
        entry = {"coefficients": list(c)}
        try:
            rec = recurrence_scan(combo, x0, t_max, eps, tol=tol, angles=angles)
        except FixedPoint:
            entry["degenerate"] = "field vanishes at x0"
            evidence.append(entry)
            continue
        except (FlowEscapedChart, StepUnderflow) as exc:
            entry.update({"period": None, "escaped_chart_at": exc.time})
            evidence.append(entry)
            continue
        entry.update(rec.to_dict())
        evidence.append(entry)
        if rec.period is not None:
            candidate = periodic + [c]
            if np.linalg.matrix_rank(np.array(candidate, dtype=float)) == len(candidate):
                periodic = candidate
        if len(periodic) == m:
            break
    r = len(periodic)
    return TopologyReport(m, r, toroidal_label(m, r), evidence)
