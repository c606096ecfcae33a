import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from isokle.quadrature import (
    FactorizationError,
    Role,
    cholesky_factor,
    collocation_matrix,
    element_quadrature,
    gauss_rule,
    lu_factor,
    mixed_mass_matrix,
    trial_mass_matrix,
)
from isokle.splines import BSplineBasis


def sympy_mass(knots_a, pa, knots_b, pb):
    """Exact Gramian of two spline bases by symbolic integration."""
    x = sp.Symbol("x")
    ka = [sp.Rational(k).limit_denominator(1000) for k in knots_a]
    kb = [sp.Rational(k).limit_denominator(1000) for k in knots_b]
    Ba = sp.bspline_basis_set(pa, ka, x)
    Bb = sp.bspline_basis_set(pb, kb, x)
    # sympy leaves the last function undefined at x = 1; irrelevant for integrals
    return np.array([[float(sp.integrate(a * b, (x, 0, 1))) for b in Bb] for a in Ba])


@pytest.mark.parametrize("q", [1, 2, 3, 5, 8])
def test_gauss_rule_exactness(q):
    rule = gauss_rule(q)
    for k in range(2 * q):
        exact = (1 - (-1) ** (k + 1)) / (k + 1)
        assert abs(rule.weights @ rule.nodes**k - exact) < 1e-13


def test_element_quadrature_integrates_over_breaks():
    x, w = element_quadrature(np.array([0, 0.3, 1.0]), 3)
    assert abs(w.sum() - 1.0) < 1e-15
    assert abs(w @ x**5 - 1 / 6) < 1e-14


def test_bernstein_mass_matrix():
    b = BSplineBasis.from_knots([0, 0, 0, 1, 1, 1], 2)
    Z = trial_mass_matrix(b).data
    expected = np.array([[6, 3, 1], [3, 4, 3], [1, 3, 6]]) / 30
    np.testing.assert_allclose(Z, expected, atol=1e-15)
    np.testing.assert_allclose(Z, sympy_mass(b.knots, 2, b.knots, 2), atol=1e-15)


def test_trial_mass_matches_symbolic_nonuniform():
    knots = [0, 0, 0, 0.2, 0.5, 0.5, 0.9, 1, 1, 1]
    b = BSplineBasis.from_knots(knots, 2)
    np.testing.assert_allclose(trial_mass_matrix(b).data, sympy_mass(knots, 2, knots, 2), atol=1e-14)


def test_mixed_mass_matches_symbolic():
    ka = [0, 0, 0, 0, 0.25, 0.5, 0.5, 0.5, 0.5, 1, 1, 1, 1]
    kb = [0, 0, 0, 0.4, 1, 1, 1]
    ia, tb = BSplineBasis.from_knots(ka, 3), BSplineBasis.from_knots(kb, 2)
    M = mixed_mass_matrix(ia, tb)
    assert M.role is Role.MIXED_MASS and M.shape == (ia.n, tb.n)
    np.testing.assert_allclose(M.data, sympy_mass(ka, 3, kb, 2), atol=1e-14)


def test_same_space_mixed_mass_is_trial_mass():
    b = BSplineBasis.uniform(3, 6)
    np.testing.assert_array_equal(mixed_mass_matrix(b, b).data, trial_mass_matrix(b).data)


def test_collocation_matrix_linear_is_identity():
    b = BSplineBasis.uniform(1, 9)
    np.testing.assert_allclose(collocation_matrix(b).data, np.eye(b.n), atol=1e-15)


@given(st.integers(1, 4), st.integers(1, 120), st.integers(0, 3))
@settings(max_examples=25, deadline=None)
def test_banded_and_dense_factorizations_agree(p, ne, seed):
    b = BSplineBasis.uniform(p, ne)
    Z = trial_mass_matrix(b)
    rhs = np.random.default_rng(seed).standard_normal((b.n, 2))
    cb, cd = cholesky_factor(Z, banded=True), cholesky_factor(Z, banded=False)
    np.testing.assert_allclose(cb.L, cd.L, atol=1e-12)
    np.testing.assert_allclose(cb.L @ cb.solve_lower(rhs), rhs, atol=1e-10)
    np.testing.assert_allclose(cb.solve_upper(rhs), cd.solve_upper(rhs), rtol=1e-8, atol=1e-8)
    Bt = collocation_matrix(b)
    lb, ld = lu_factor(Bt, banded=True), lu_factor(Bt, banded=False)
    for tr in (False, True):
        A = Bt.data.T if tr else Bt.data
        np.testing.assert_allclose(A @ lb.solve(rhs, transpose=tr), rhs, atol=1e-10)
        np.testing.assert_allclose(lb.solve(rhs, transpose=tr), ld.solve(rhs, transpose=tr), atol=1e-10)


def test_cholesky_failure_reports_index():
    a = np.diag([1.0, 2.0, -1.0, 4.0])
    for banded in (True, False):
        with pytest.raises(FactorizationError) as err:
            cholesky_factor(a, banded=banded)
        assert err.value.index == 2


def test_singular_lu_reports_index():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(FactorizationError):
        lu_factor(a)


def test_gauss_rule_small_cases():
    r1 = gauss_rule(1)
    assert r1.nodes.tolist() == [0.0] and r1.weights.tolist() == [2.0]
    r2 = gauss_rule(2)
    np.testing.assert_allclose(r2.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [1, 1], atol=1e-15)
    r5 = gauss_rule(5)
    assert abs(r5.weights @ r5.nodes**8 - 2 / 9) < 1e-14
    with pytest.raises(ValueError):
        gauss_rule(0)


def test_mass_matrix_small_closed_forms():
    hat = BSplineBasis.from_knots([0, 0, 1, 1], 1)
    np.testing.assert_allclose(trial_mass_matrix(hat).data, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)
    pw = BSplineBasis.from_knots([0, 0.5, 1], 0)
    np.testing.assert_allclose(trial_mass_matrix(pw).data, np.diag([0.5, 0.5]), atol=1e-15)
    const = BSplineBasis.from_knots([0, 1], 0)
    np.testing.assert_allclose(mixed_mass_matrix(const, hat).data, [[0.5, 0.5]], atol=1e-15)


def test_collocation_matrix_bernstein():
    b = BSplineBasis.from_knots([0, 0, 0, 1, 1, 1], 2)
    np.testing.assert_allclose(collocation_matrix(b).data, [[1, 0, 0], [0.25, 0.5, 0.25], [0, 0, 1]], atol=1e-15)


def test_cholesky_small_cases(rng):
    np.testing.assert_array_equal(cholesky_factor(np.eye(4)).L, np.eye(4))
    hat = BSplineBasis.from_knots([0, 0, 1, 1], 1)
    assert abs(cholesky_factor(trial_mass_matrix(hat)).L[0, 0] - np.sqrt(1 / 3)) < 1e-15
    a = rng.standard_normal((8, 8))
    spd = a @ a.T + 8 * np.eye(8)
    L = cholesky_factor(spd).L
    np.testing.assert_allclose(L @ L.T, spd, atol=1e-12)


def test_storage_dense_small_banded_large():
    small = trial_mass_matrix(BSplineBasis.uniform(2, 10))
    assert small.storage == "dense" and isinstance(small.data, np.ndarray)
    basis = BSplineBasis.uniform(3, 200)
    z = trial_mass_matrix(basis)
    bt = collocation_matrix(BSplineBasis.uniform(2, 300, continuity=0))
    assert z.storage == "banded" and z.data.nnz <= (2 * 3 + 1) * z.shape[0]
    assert z.lower == z.upper == 3
    assert bt.storage == "banded"
    dense = z.toarray()
    assert np.array_equal(dense, dense.T)
    x = np.random.default_rng(0).standard_normal(z.shape[0])
    assert np.allclose(z.data @ x, dense @ x, rtol=0, atol=1e-15)
