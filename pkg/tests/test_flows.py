import io
import math

import numpy as np
import pytest

from ncint import expr as ex
from ncint.errors import FixedPoint, FlowEscapedChart
from ncint.flows import (_directions, classify_fiber, detect_period, integrate_flow, invariant_drift,
                         recurrence_scan, toroidal_label)
from ncint.poisson import VectorField
from ncint.systems import builtin


def rotation(x):
    return np.array([x[1], -x[0]])


def test_harmonic_flow_matches_the_analytic_solution():
    traj = integrate_flow(rotation, [1.0, 0.0], 10.0, 1e-10)
    exact = np.column_stack([np.cos(traj.times), -np.sin(traj.times)])
    assert np.max(np.abs(traj.states - exact)) < 1e-8


def test_dense_output_between_grid_points():
    traj = integrate_flow(rotation, [1.0, 0.0], 5.0, 1e-10)
    for t in np.linspace(0, 5, 37):
        assert np.allclose(traj.at(t), [math.cos(t), -math.sin(t)], atol=1e-8)


def test_exponential_growth_and_error_statistics():
    traj = integrate_flow(lambda x: x, [1.0], 3.0, 1e-11)
    assert traj.states[-1, 0] == pytest.approx(math.exp(3.0), rel=1e-9)
    assert traj.stats["steps"] > 0 and traj.stats["nfev"] >= 6 * traj.stats["steps"]
    assert traj.stats["max_error"] <= 1.0


def test_output_grid_is_uniform():
    traj = integrate_flow(rotation, [1.0, 0.0], 2.0, 1e-8, max_spacing=0.25)
    assert np.allclose(np.diff(traj.times), 0.25)
    assert traj.times[-1] == 2.0


def test_csv_has_header_and_full_precision():
    traj = integrate_flow(rotation, [1.0, 0.0], 1.0, 1e-8, coords=("q", "p"), max_spacing=0.5)
    buf = io.StringIO()
    text = traj.to_csv(buf)
    assert buf.getvalue() == text
    lines = text.splitlines()
    assert lines[0] == "t,q,p" and len(lines) == 4
    assert float(lines[-1].split(",")[1]) == traj.states[-1, 0]


def test_leaving_the_chart_is_reported_with_a_time():
    # x' = -sqrt(x)/sqrt(x) = -1 is defined only for x > 0; from x = 1 it exits at t = 1
    V = VectorField(("x",), [ex.parse("-sqrt(x)/sqrt(x)")])
    with pytest.raises(FlowEscapedChart) as info:
        integrate_flow(V, [1.0], 3.0, 1e-10)
    assert 0.9 < info.value.time <= 1.0 + 1e-6


def test_invariant_drift_of_energy():
    traj = integrate_flow(rotation, [0.6, 0.8], 20.0, 1e-10, coords=("q", "p"))
    assert invariant_drift(traj, ["q^2 + p^2"])[0] < 1e-8


@pytest.mark.parametrize("eps", [1e-3, 1e-4, 1e-5])
def test_period_of_the_oscillator(eps):
    assert detect_period(rotation, [1.0, 0.0], 20.0, eps) == pytest.approx(2 * math.pi, abs=1e-8)


def test_no_period_for_translation():
    rec = recurrence_scan(lambda x: np.array([1.0, 0.0]), [0.0, 0.0], 10.0)
    assert rec.period is None and rec.monotone and rec.departed


def test_angle_coordinates_are_compared_mod_two_pi():
    spin = lambda x: np.array([1.0, 0.0])  # noqa: E731
    assert recurrence_scan(spin, [0.5, 1.0], 20.0).period is None
    period = recurrence_scan(spin, [0.5, 1.0], 20.0, angles=[True, False]).period
    assert period == pytest.approx(2 * math.pi, abs=1e-8)


def test_fixed_point_is_refused():
    with pytest.raises(FixedPoint):
        recurrence_scan(lambda x: np.zeros(2), [0.0, 0.0])


def test_toroidal_labels():
    assert toroidal_label(1, 0) == "R^1"
    assert toroidal_label(1, 1) == "T^1"
    assert toroidal_label(2, 1) == "R^1 x T^1"
    assert toroidal_label(3, 3) == "T^3"
    assert toroidal_label(0, 0) == "point"


def test_integer_directions_are_primitive_and_unique_up_to_sign():
    dirs = _directions(2, 2)
    assert (1, 0) in dirs and (0, 1) in dirs and (1, -1) in dirs
    assert (2, 2) not in dirs and (-1, 0) not in dirs
    assert len(dirs) == len(set(dirs))


@pytest.mark.parametrize("name, label", [
    ("so21", "R^1"), ("oscillator", "T^1"), ("oscillator-free", "R^1 x T^1"),
    ("free-particle", "R^1"), ("rotor", "T^1"),
])
def test_classification_of_builtin_fibers(name, label):
    s = builtin(name)
    rep = classify_fiber(s, s.sample_points(1, seed=2)[0], t_max=40.0)
    assert rep.classification == label
    assert "heuristic" in rep.method
