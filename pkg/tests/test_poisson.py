import numpy as np
import pytest

from ncint import expr as ex
from ncint.errors import DegenerateForm, SingularChart, UnboundVariable
from ncint.poisson import (PoissonStructure, SymplecticForm, VectorField, bracket, chart_jacobian,
                           hamiltonian_vector_field, invert_symplectic, jacobi_residual, numeric_rank,
                           pushforward_bivector)

import oracles

CHART = ("r", "y", "gamma", "x1")
W54 = PoissonStructure.from_wedges(CHART, [(1, "r", "y"), (1, "gamma", "x1")])
r, y, gamma, x1 = (ex.Var(c) for c in CHART)


def test_wedge_convention_sets_both_entries():
    W = W54.evaluate([2, 0, 0, 0])
    assert W[0, 1] == 1 and W[1, 0] == -1
    assert W[2, 3] == 1 and W[3, 2] == -1
    assert W54.entry(1, 0) == ex.Const(-1.0)
    assert W54.is_constant()


def test_from_wedges_merges_and_drops_zero_terms():
    P = PoissonStructure.from_wedges(("a", "b"), [(1, "a", "b"), (1, "b", "a")])
    assert P.upper == {}
    Q = PoissonStructure.from_wedges(("a", "b"), [(2, "a", "b"), (ex.Var("a"), "a", "b")])
    assert Q.evaluate({"a": 3, "b": 0})[0, 1] == 5


def test_bracket_uses_w_ij_df_i_dg_j():
    assert ex.evaluate(bracket(r, y, W54), {}) == 1.0
    assert ex.evaluate(bracket(gamma, x1, W54), {}) == 1.0
    assert ex.evaluate(bracket(x1, gamma, W54), {}) == -1.0


def test_hamiltonian_field_is_the_derivation_h_bracket():
    # X_H(f) = {H, f} for every coordinate function f
    H = ex.sqrt(r ** 2 - x1 ** 2) * ex.cosh(gamma)
    X = hamiltonian_vector_field(H, W54)
    p = [2.0, 0.3, 0.4, 0.2]
    for i, c in enumerate(CHART):
        want = ex.evaluate(bracket(H, ex.Var(c), W54), dict(zip(CHART, p)))
        assert X.at(p)[i] == pytest.approx(want, abs=1e-14)


def test_casimir_generates_d_by_dy():
    X = hamiltonian_vector_field(r, W54)
    assert list(X.at([2, 0, 0, 0])) == [0, 1, 0, 0]


def test_x1_generates_minus_d_by_dgamma():
    # with X_H = {H, .}, the field of x1 is -d/dgamma (ledger: sign convention)
    assert list(hamiltonian_vector_field(x1, W54).at([2, 0, 0, 0])) == [0, 0, -1, 0]


def test_bracket_matches_finite_difference_oracle():
    coords = ("a", "b", "c")
    a, b, c = (ex.Var(n) for n in coords)
    P = PoissonStructure.from_wedges(coords, [(c, "a", "b"), (a * b, "b", "c"), (ex.sin(a), "a", "c")])
    f, g = a ** 2 * ex.cos(b) + c, ex.exp(a - c) * b
    fn = ex.compile_expr(bracket(f, g, P), coords)
    rng = np.random.default_rng(0)
    for p in rng.uniform(-1, 1, (20, 3)):
        want = oracles.fd_bracket(f, g, P.evaluate(p), coords, p)
        assert oracles.relative_gap(fn(list(p)), want) < 1e-8


def test_bracket_rejects_foreign_variables():
    with pytest.raises(UnboundVariable):
        bracket(ex.Var("q"), r, W54)


def test_jacobi_residual_of_constant_structure_vanishes():
    f, g, h = r * x1, ex.sin(y) + gamma ** 2, ex.exp(x1) * r
    assert abs(jacobi_residual(W54, f, g, h, [2.0, 0.1, 0.2, 0.3])) < 1e-12


def test_vector_field_algebra():
    X = VectorField(("a", "b"), [ex.Var("b"), -ex.Var("a")])
    Y = X.scaled(2) + X
    assert list(Y.at([1, 2])) == [6, -3]
    assert ex.evaluate(X.apply(ex.parse("a^2 + b^2")), {"a": 1.0, "b": 2.0}) == 0
    assert "b" in str(X)


def test_symplectic_inverse_maps_canonical_form_to_canonical_bivector():
    # Omega = dJ^dy + dp^dq  ->  W = d_J^d_y + d_p^d_q
    coords = ("J", "y", "p", "q")
    S = SymplecticForm.from_wedges(coords, [(1, "J", "y"), (1, "p", "q")])
    W = invert_symplectic(S, [0, 0, 0, 0])
    want = PoissonStructure.from_wedges(coords, [(1, "J", "y"), (1, "p", "q")]).evaluate([0] * 4)
    assert np.array_equal(W, want)
    assert np.array_equal(S.to_poisson().evaluate([0] * 4), want)


def test_degenerate_symplectic_form_is_reported():
    S = SymplecticForm.from_wedges(("a", "b"), [(ex.Var("a"), "a", "b")])
    with pytest.raises(DegenerateForm):
        invert_symplectic(S, [0.0, 1.0])


def test_symplectic_form_needs_even_dimension():
    with pytest.raises(ValueError):
        SymplecticForm.from_wedges(("a", "b", "c"), [(1, "a", "b")])


def test_numeric_rank():
    assert numeric_rank(np.eye(3)) == 3
    assert numeric_rank(np.array([[1, 2], [2, 4.0]])) == 1
    assert numeric_rank(np.zeros((2, 2))) == 0
    assert numeric_rank(np.array([[1, 0], [0, 1e-12]])) == 1


def test_chart_jacobian_and_singular_chart():
    P = PoissonStructure.from_wedges(("a", "b"), [(1, "a", "b")])
    J = chart_jacobian([ex.parse("a*b"), ex.parse("a")], ("a", "b"), [2.0, 3.0])
    assert np.array_equal(J, [[3, 2], [1, 0]])
    with pytest.raises(SingularChart):
        pushforward_bivector(P, [ex.parse("a^2"), ex.parse("b")], [0.0, 1.0])


def test_pushforward_transforms_as_a_bivector():
    # linear chart (u, v) = (a + b, a - b) gives {u, v} = -2 {a, b}
    P = PoissonStructure.from_wedges(("a", "b"), [(1, "a", "b")])
    Wp = pushforward_bivector(P, [ex.parse("a + b"), ex.parse("a - b")], [0.3, 0.4])
    assert Wp[0, 1] == pytest.approx(-2)
