import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import beta as beta_fn
from scipy.special import eval_gegenbauer, roots_jacobi

from qcurve.spectral import (
    BasisSpec,
    DomainError,
    SpectralField,
    analyze,
    basis_norm_sq,
    basis_norms,
    build_quadrature,
    derivative,
    eigenvalues,
    evaluate,
    g_map,
    gegenbauer_eval,
    gegenbauer_table,
    laplace_eigenvalues,
    mul_one_minus_x2,
    mul_x,
    synthesize,
    weight_mass,
)


def classical_hat(n, k, x):
    lam = (n - 1) / 2
    return eval_gegenbauer(k, lam, x) / eval_gegenbauer(k, lam, 1.0)


def exact_moment(n, m):
    if m % 2:
        return 0.0
    a = (n - 2) / 2
    return beta_fn((m + 1) / 2, a + 1)


# --- gegenbauer_eval ------------------------------------------------------


def test_degree_zero_is_one():
    assert gegenbauer_eval(BasisSpec(6, 4), 0, 0.37) == 1.0


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
def test_degree_one_is_x(n):
    x = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(gegenbauer_eval(BasisSpec(n, 4), 1, x), x, rtol=0, atol=0)


@pytest.mark.parametrize("n", [2, 3, 6, 8])
def test_degree_two_closed_form(n):
    x = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(
        gegenbauer_eval(BasisSpec(n, 4), 2, x), ((n + 1) * x**2 - 1) / n, rtol=1e-15, atol=1e-15
    )
    assert gegenbauer_eval(BasisSpec(n, 4), 2, 1.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 6, 8])
def test_matches_classical_gegenbauer(n):
    x = np.linspace(-0.999, 0.999, 41)
    T = gegenbauer_table(n, 40, x)
    for k in range(41):
        np.testing.assert_allclose(T[k], classical_hat(n, k, x), rtol=1e-11, atol=1e-12)


def test_eval_domain_errors():
    spec = BasisSpec(6, 4)
    with pytest.raises(DomainError):
        gegenbauer_eval(spec, 5, 0.1)
    with pytest.raises(DomainError):
        gegenbauer_eval(spec, 2, 1.5)


@pytest.mark.parametrize("n", [2, 5, 6, 8])
def test_endpoint_values_and_parity(n):
    T = gegenbauer_table(n, 60, np.array([-1.0, 1.0]))
    np.testing.assert_allclose(T[:, 1], 1.0, rtol=1e-13)
    np.testing.assert_allclose(T[:, 0], (-1.0) ** np.arange(61), rtol=1e-13)


def test_basis_spec_validation():
    with pytest.raises(DomainError):
        BasisSpec(1, 4)
    with pytest.raises(DomainError):
        BasisSpec(6, 1)


# --- eigenvalues / norms ---------------------------------------------------


@pytest.mark.parametrize(
    "n,k,expected",
    [(6, 1, (6.0, 720.0)), (6, 2, (14.0, 5040.0)), (4, 0, (0.0, 0.0)), (8, 0, (0.0, 0.0))],
)
def test_eigenvalues(n, k, expected):
    assert eigenvalues(BasisSpec(n, 4), k) == expected


def test_paneitz_eigenvalue_is_n_factorial_at_one():
    for n in range(2, 9):
        assert eigenvalues(BasisSpec(n, 4), 1)[1] == math.factorial(n)


@pytest.mark.parametrize(
    "n,k,expected", [(6, 1, 16 / 105), (8, 1, 32 / 315), (6, 0, 16 / 15), (6, 2, 16 / 405)]
)
def test_basis_norm_sq(n, k, expected):
    assert basis_norm_sq(BasisSpec(n, 4), k) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n", range(2, 9))
def test_weight_mass_gamma_form(n):
    assert weight_mass(n) == pytest.approx(
        math.sqrt(math.pi) * math.gamma(n / 2) / math.gamma((n + 1) / 2), rel=1e-15
    )


@pytest.mark.parametrize("n", [4, 6, 8])
def test_norm_formula_even_n(n):
    # 2^{n-1} [(n/2-1)!]^2 lbar_k / ((n+2k-1) lambda_k) for k >= 1
    spec = BasisSpec(n, 30)
    for k in range(1, 31):
        lb, lam = eigenvalues(spec, k)
        ref = 2 ** (n - 1) * math.factorial(n // 2 - 1) ** 2 * lb / ((n + 2 * k - 1) * lam)
        assert basis_norm_sq(spec, k) == pytest.approx(ref, rel=1e-14)


# --- quadrature ------------------------------------------------------------


def test_two_dimensional_rule_is_gauss_legendre():
    rule = build_quadrature(2, 3)
    x, w = np.polynomial.legendre.leggauss(3)
    np.testing.assert_allclose(rule.nodes, x, atol=1e-15)
    np.testing.assert_allclose(rule.weights, w, atol=1e-15)


def test_weight_sum_n6():
    assert build_quadrature(6, 4).weights.sum() == pytest.approx(16 / 15, rel=1e-14)


def test_second_moment_n6():
    rule = build_quadrature(6, 8)
    assert rule.integrate(rule.nodes**2) == pytest.approx(16 / 105, rel=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
@pytest.mark.parametrize("Q", [1, 2, 3, 5, 8, 13, 32, 64])
def test_quadrature_exactness(n, Q):
    rule = build_quadrature(n, Q)
    for m in range(2 * Q):
        got = rule.integrate(rule.nodes**m)
        ref = exact_moment(n, m)
        if ref == 0.0:
            assert abs(got) <= 1e-15
        else:
            assert abs(got - ref) <= 1e-13 * ref, (m, got, ref)


@pytest.mark.parametrize("n", [2, 3, 6, 8])
@pytest.mark.parametrize("Q", [7, 50, 300])
def test_quadrature_symmetry_and_scipy_oracle(n, Q):
    rule = build_quadrature(n, Q)
    x, w = rule.nodes, rule.weights
    assert np.all(np.diff(x) > 0)
    assert np.all(w > 0)
    np.testing.assert_array_equal(x, -x[::-1])
    np.testing.assert_array_equal(w, w[::-1])
    a = (n - 2) / 2
    xs, ws = roots_jacobi(Q, a, a)
    np.testing.assert_allclose(x, xs, atol=1e-14)
    np.testing.assert_allclose(w, ws, rtol=1e-10, atol=1e-13 * w.max())


# --- transforms ------------------------------------------------------------


def test_analyze_identity_and_constant():
    spec = BasisSpec(6, 10)
    rule = build_quadrature(6, 11)
    a = analyze(rule, rule.nodes, spec).coeffs
    assert a[1] == pytest.approx(1.0, abs=1e-13)
    assert np.max(np.abs(np.delete(a, 1))) <= 1e-13
    c = analyze(rule, np.full(rule.Q, 2.5), spec).coeffs
    assert c[0] == pytest.approx(2.5, abs=1e-13)
    assert np.max(np.abs(c[1:])) <= 1e-13


def test_synthesize_identity_and_constant():
    spec = BasisSpec(6, 10)
    x = np.linspace(-1, 1, 17)
    np.testing.assert_allclose(synthesize(SpectralField.mode(spec, 1), x), x, atol=1e-15)
    np.testing.assert_allclose(synthesize(SpectralField.mode(spec, 0, 2.5), x), 2.5, atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 6, 8])
def test_round_trip(n):
    rng = np.random.default_rng(3)
    spec = BasisSpec(n, 32)
    rule = build_quadrature(n, 64)
    field = SpectralField(spec, rng.uniform(-1, 1, 33))
    back = analyze(rule, synthesize(field, rule.nodes), spec)
    np.testing.assert_allclose(back.coeffs, field.coeffs, atol=1e-12)


def test_round_trip_at_minimal_node_count():
    rng = np.random.default_rng(4)
    spec = BasisSpec(6, 20)
    rule = build_quadrature(6, 21)
    field = SpectralField(spec, rng.uniform(-1, 1, 21))
    np.testing.assert_allclose(analyze(rule, field(rule.nodes), spec).coeffs, field.coeffs, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        analyze(build_quadrature(4, 10), np.zeros(10), BasisSpec(6, 4))


def test_synthesize_rejects_out_of_range():
    with pytest.raises(DomainError):
        synthesize(SpectralField.zeros(BasisSpec(6, 4)), [1.0001])


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_orthogonality(n):
    K = 40
    rule = build_quadrature(n, K + 1)
    V = gegenbauer_table(n, K, rule.nodes)
    M = (V * rule.weights) @ V.T
    nu = basis_norms(n, K)
    np.testing.assert_allclose(np.diag(M), nu, rtol=1e-12)
    off = M - np.diag(np.diag(M))
    assert np.max(np.abs(off)) <= 1e-12


@pytest.mark.parametrize("n", [3, 6, 8])
def test_derivative_bound(n):
    K = 30
    rule = build_quadrature(n, 200)
    D = gegenbauer_table(n, K, rule.nodes, deriv=1)
    lb = laplace_eigenvalues(n, K)
    assert np.all(np.max(np.abs(D), axis=1) <= lb / n * (1 + 1e-12))


@pytest.mark.parametrize("n", [2, 5, 6, 8])
def test_eigen_ode(n):
    K = 30
    rule = build_quadrature(n, 40)
    x = rule.nodes
    C = gegenbauer_table(n, K, x)
    d1 = gegenbauer_table(n, K, x, deriv=1)
    d2 = gegenbauer_table(n, K, x, deriv=2)
    lb = laplace_eigenvalues(n, K)
    res = (1 - x**2) * d2 - n * x * d1 + lb[:, None] * C
    assert np.all(np.max(np.abs(res), axis=1) <= 1e-10 * np.maximum(lb, 1))


# --- coefficient-space operators -------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 6, 8])
def test_coefficient_derivative_matches_pointwise(n):
    rng = np.random.default_rng(5)
    spec = BasisSpec(n, 25)
    f = SpectralField(spec, rng.uniform(-1, 1, 26))
    x = np.linspace(-1, 1, 33)
    for m in range(1, 4):
        ref = np.tensordot(f.coeffs, gegenbauer_table(n, 25, x, deriv=m), axes=1)
        np.testing.assert_allclose(evaluate(f, x, m), ref, rtol=1e-11, atol=1e-9 * np.max(np.abs(ref)))


def test_mul_x_and_one_minus_x2():
    rng = np.random.default_rng(6)
    spec = BasisSpec(6, 15)
    f = SpectralField(spec, rng.uniform(-1, 1, 16))
    x = np.linspace(-1, 1, 21)
    np.testing.assert_allclose(mul_x(f)(x), x * f(x), atol=1e-13)
    np.testing.assert_allclose(mul_one_minus_x2(f, 3)(x), (1 - x**2) ** 3 * f(x), atol=1e-13)


# --- G map -------------------------------------------------------------------


def test_g_map_of_x_n6():
    spec = BasisSpec(6, 8)
    rule = build_quadrature(6, spec.K + 2)
    G = g_map(SpectralField.mode(spec, 1), rule).coeffs
    expected = np.zeros(spec.K + 2)
    expected[0], expected[2] = 6 / 7, -6 / 7
    np.testing.assert_allclose(G, expected, atol=1e-14)


def test_g_map_of_constant():
    spec = BasisSpec(6, 8)
    G = g_map(SpectralField.mode(spec, 0, 3.0), build_quadrature(6, 10))
    assert np.max(np.abs(G.coeffs)) == 0.0


def test_g_map_log_profile():
    a = 0.5
    spec = BasisSpec(6, 64)
    rule = build_quadrature(6, 2 * 64 + 6)
    u = analyze(rule, -np.log(1 - a * rule.nodes), spec)
    G = g_map(u, rule)
    assert G(0.0) == pytest.approx(0.5, abs=1e-13)
    x = np.linspace(-1, 1, 101)
    np.testing.assert_allclose(G(x), a * (1 - x**2) / (1 - a * x), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 6, 8])
def test_g_map_three_term_relation(n):
    # (1-x^2) C_k' = lbar_k / (2k+n-1) (C_{k-1} - C_{k+1}), the corrected recursion
    K = 20
    spec = BasisSpec(n, K)
    rule = build_quadrature(n, K + 2)
    lb = laplace_eigenvalues(n, K + 1)
    for k in range(1, K + 1):
        G = g_map(SpectralField.mode(spec, k), rule).coeffs
        ref = np.zeros(K + 2)
        c = lb[k] / (2 * k + n - 1)
        ref[k - 1], ref[k + 1] = c, -c
        np.testing.assert_allclose(G, ref, atol=1e-11 * max(1.0, c))


def test_g_map_matches_exact_coefficient_route():
    rng = np.random.default_rng(7)
    spec = BasisSpec(8, 30)
    u = SpectralField(spec, rng.uniform(-1, 1, 31) * 0.7 ** np.arange(31))
    G = g_map(u, build_quadrature(8, 32))
    exact = mul_one_minus_x2(derivative(u)).resized(31)
    np.testing.assert_allclose(G.coeffs, exact.coeffs, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=11, max_size=11),
    st.lists(st.floats(-1, 1), min_size=11, max_size=11),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_g_map_linearity(a, b, s, t):
    spec = BasisSpec(6, 10)
    rule = build_quadrature(6, 26)
    u, v = SpectralField(spec, a), SpectralField(spec, b)
    lhs = g_map(s * u + t * v, rule).coeffs
    rhs = s * g_map(u, rule).coeffs + t * g_map(v, rule).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
