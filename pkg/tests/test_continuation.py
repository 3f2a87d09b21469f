import math

import numpy as np
import pytest

from qcurve.continuation import (
    ContinuationError,
    ContinuationOptions,
    Termination,
    bifurcation_points,
    branch_switch,
    continue_branch,
    cubic_ratio,
    default_eps,
    detect_trivial_crossings,
    fit_transcritical_slope,
    slope_estimate,
    solve_on_branch,
    transcritical_slope,
    transcritical_slope_closed_form,
)
from qcurve.solver import SolutionClass, classify
from qcurve.spectral import DomainError, paneitz_eigenvalues


@pytest.fixture(scope="module")
def b2_minus_6():
    return continue_branch(branch_switch(6, 2, -1, K=32), ContinuationOptions(alpha_window=(1 / 7 - 1e-9, 0.5), l_inf_max=6))


@pytest.fixture(scope="module")
def b2_minus_8():
    return continue_branch(branch_switch(8, 2, -1, K=32), ContinuationOptions(alpha_window=(1 / 9 - 1e-9, 0.5), l_inf_max=6))


# --- bifurcation values ---------------------------------------------------


def test_n6_bifurcation_values():
    assert [p.rho for p in bifurcation_points(6, 3)] == [120.0, 840.0, 3360.0]


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
def test_detected_crossings_match_formula(n):
    want = [p.rho for p in bifurcation_points(n, 10)]
    got = detect_trivial_crossings(n, 10)
    np.testing.assert_allclose(got, want, rtol=1e-10)


def test_alpha_k_is_n_factorial_over_lambda_k():
    for p in bifurcation_points(8, 5):
        assert p.alpha == pytest.approx(math.factorial(8) / paneitz_eigenvalues(8, p.k)[p.k], rel=1e-15)


# --- slopes ---------------------------------------------------------------


@pytest.mark.parametrize("n", [4, 6, 8])
def test_transcritical_slope_value(n):
    # -2 (n+1)! (n-1) / (n (n+5))
    assert transcritical_slope(n) == pytest.approx(-2 * math.factorial(n + 1) * (n - 1) / (n * (n + 5)), rel=1e-14)


def test_printed_closed_form_differs_by_factor():
    for n in (6, 8):
        ratio = transcritical_slope_closed_form(n) / transcritical_slope(n)
        assert ratio == pytest.approx((n - 1) / 2, rel=1e-14)


def test_cubic_ratio_n6():
    assert cubic_ratio(6) == pytest.approx(20 / 66, rel=1e-14)


@pytest.mark.parametrize("n", [6, 8])
def test_fitted_slope_matches_expansion(n):
    s, branches = fit_transcritical_slope(n)
    assert s == pytest.approx(transcritical_slope(n), rel=1e-3)
    # the two halves leave rho_2 on opposite sides
    assert branches[0].points[-1].rho < branches[0].rho_k < branches[1].points[-1].rho


def test_default_eps_range():
    for n in (4, 6, 8):
        for k in (2, 3):
            assert 1e-5 <= default_eps(n, k) <= 1e-2


# --- branch switching -----------------------------------------------------


def test_branch_switch_sign_convention():
    p_minus, u_minus = branch_switch(6, 2, -1, eps=1e-3)
    p_plus, u_plus = branch_switch(6, 2, 1, eps=1e-3)
    assert u_minus.coeffs[2] == 1e-3 and u_plus.coeffs[2] == -1e-3
    # negative slope: positive amplitude sits below rho_2
    assert p_minus.rho < 840.0 < p_plus.rho


def test_branch_switch_validation():
    with pytest.raises(DomainError):
        branch_switch(6, 2, 0)
    with pytest.raises(DomainError):
        branch_switch(6, 40, 1, K=32)


# --- tracing --------------------------------------------------------------


def test_b2_minus_heads_to_one_half(b2_minus_6):
    br = b2_minus_6
    alphas = np.array([p.alpha for p in br.points])
    assert br.termination == Termination.REACHED_TARGET
    assert np.all((alphas > 1 / 7) & (alphas < 0.5))
    assert np.all(np.diff(alphas) > 0)
    assert br.points[-1].sol.diagnostics.l_inf > 5
    assert all(p.amp > 0 for p in br.points)


def test_b2_minus_points_are_converged(b2_minus_6):
    for p in b2_minus_6.points:
        assert p.sol.residual_norm < 1e-10
        assert np.all(p.sol.u.coeffs[1::2] == 0.0)


def test_b2_minus_n8_confined(b2_minus_8):
    alphas = np.array([p.alpha for p in b2_minus_8.points])
    assert np.all((alphas > 1 / 9) & (alphas < 19 / 23))


def test_arc_parameter_increases(b2_minus_6):
    arcs = [p.arc_param for p in b2_minus_6.points]
    assert np.all(np.diff(arcs) > 0)


def test_b3_branches_are_reflections():
    opts = ContinuationOptions(max_steps=12)
    plus = continue_branch(branch_switch(6, 3, 1, K=32), opts, k=3, sign=1)
    minus = continue_branch(branch_switch(6, 3, -1, K=32), opts, k=3, sign=-1)
    assert len(plus.points) == len(minus.points)
    for p, q in zip(plus.points, minus.points):
        assert p.rho == pytest.approx(q.rho, rel=1e-10)
        np.testing.assert_allclose(p.sol.u.flipped().coeffs, q.sol.u.resized(p.sol.u.K).coeffs, atol=1e-10)


def test_solve_on_branch(b2_minus_6):
    sol = solve_on_branch(b2_minus_6, 0.3)
    assert sol.params.alpha == 0.3
    assert sol.residual_norm < 1e-12
    assert classify(sol) is SolutionClass.NonConstant


def test_solve_on_branch_outside_range(b2_minus_6):
    with pytest.raises(ContinuationError):
        solve_on_branch(b2_minus_6, 0.9)


def test_window_exit_point_kept():
    br = continue_branch(branch_switch(6, 2, -1, K=32), ContinuationOptions(alpha_window=(0.14, 0.3)))
    assert br.termination == Termination.REACHED_TARGET
    assert br.points[-2].alpha <= 0.3 < br.points[-1].alpha


def test_max_steps():
    br = continue_branch(branch_switch(6, 2, -1, K=32), ContinuationOptions(max_steps=4))
    assert br.termination == Termination.MAX_STEPS
    assert len(br.points) == 4


def test_slope_estimate_needs_points(b2_minus_6):
    with pytest.raises(ContinuationError):
        slope_estimate(b2_minus_6, max_amp=1e-9)


def test_seed_without_mode_component():
    p, u = branch_switch(6, 2, -1)
    with pytest.raises(ContinuationError):
        continue_branch((p, u.with_mean(0.0) * 0.0), k=2)


@pytest.mark.parametrize("kw", [{"ds": 0.0}, {"max_steps": 0}, {"alpha_window": (0.5, 0.2)}])
def test_options_validated(kw):
    with pytest.raises(DomainError):
        ContinuationOptions(**kw)
