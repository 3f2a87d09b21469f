"""Damped Newton iteration for the Galerkin-projected equation at fixed alpha."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh, lu_factor, lu_solve

from .paneitz import (
    EquationParams,
    SolutionPoint,
    _scaled_exp,
    default_rule,
    make_solution,
    tail_fraction,
)
from .spectral import (
    BasisSpec,
    DomainError,
    QuadratureRule,
    SpectralField,
    analysis_matrix,
    basis_norms,
    paneitz_eigenvalues,
    synthesis_matrix,
    weight_mass,
)

__all__ = [
    "NewtonOptions",
    "NewtonFailure",
    "LinearizedSystem",
    "linearize",
    "jacobian",
    "newton_solve",
    "jacobian_spectrum_at_zero",
    "assembled_spectrum_at_zero",
    "SolutionClass",
    "classify",
    "CONSTANT_THRESHOLD",
]

CONSTANT_THRESHOLD = 1e-16


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-12
    max_iter: int = 100
    backtrack: float = 0.5
    min_step: float = 1e-6
    # sufficient decrease: accept t once |R(u + t s)| <= (1 - armijo t) |R(u)|
    armijo: float = 1e-4
    # Levenberg-Marquardt step when backtracking fails (near-singular Jacobian)
    lm_fallback: bool = True
    # double K after convergence while the top quarter of modes holds more than tail_tol
    refine: bool = True
    tail_tol: float = 1e-18
    K_max: int = 512
    # "auto" keeps exactly even initial iterates in the even subspace
    symmetry: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if not 0 < self.backtrack < 1:
            raise DomainError("backtrack factor must lie in (0, 1)")
        if self.symmetry not in ("auto", "none", "even"):
            raise DomainError(f"unknown symmetry mode {self.symmetry!r}")


class NewtonFailure(RuntimeError):
    """Newton did not reach tolerance; carries the residual history and last iterate."""

    def __init__(self, message: str, history: list[float], last: SpectralField | None = None):
        super().__init__(message)
        self.history = list(history)
        self.last = last


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    """Preconditioned residual and its derivatives at ``(rho, u)``.

    ``R_k = (lambda_k a_k - rho e_k) / (lambda_k + n rho)`` for k = 1..K, which equals
    ``F_k / (alpha lambda_k + n!)``. ``J`` is ``dR/da`` over modes 1..K and ``dR_drho``
    the parameter derivative.
    """

    R: np.ndarray
    J: np.ndarray
    dR_drho: np.ndarray
    e: np.ndarray
    weights: np.ndarray = field(repr=False)

    def norm(self, R: np.ndarray | None = None) -> float:
        R = self.R if R is None else R
        return float(math.sqrt(np.sum(self.weights * R**2)))


def _norm_weights(n: int, K: int) -> np.ndarray:
    return (basis_norms(n, K) / weight_mass(n))[1:]


def _expansion(u: SpectralField, rule: QuadratureRule):
    _, ex, _, _ = _scaled_exp(u, rule)
    A = analysis_matrix(rule, u.K)
    raw = A @ ex
    return A, ex / raw[0], raw / raw[0]


def preconditioned_residual_rho(n: int, rho: float, u: SpectralField, rule: QuadratureRule) -> np.ndarray:
    """Residual ``R_k`` for k = 1..K without the Jacobian."""
    _, _, e = _expansion(u, rule)
    lam = paneitz_eigenvalues(n, u.K)
    return ((lam * u.coeffs - rho * e) / (lam + n * rho))[1:]


def linearize(n: int, rho: float, u: SpectralField, rule: QuadratureRule, with_jacobian: bool = True) -> LinearizedSystem:
    """Assemble the preconditioned residual and its analytic Jacobian pseudo-spectrally."""
    if u.n != n:
        raise DomainError(f"dimension mismatch: n={n}, field n={u.n}")
    K = u.K
    A, g, e = _expansion(u, rule)
    lam = paneitz_eigenvalues(n, K)
    nu = basis_norms(n, K)
    scale = lam + n * rho
    R = ((lam * u.coeffs - rho * e) / scale)[1:]
    dR = (-(e + n * (lam * u.coeffs - rho * e) / scale) / scale)[1:]
    J = np.empty((0, 0))
    if with_jacobian:
        V = synthesis_matrix(rule, K)[1:]
        # de_k/da_l = n (<g C_k C_l>/nu_k - e_k e_l nu_l / nu_0), g the normalized density
        M = (A[1:] * g) @ V.T
        el = e[1:]
        De = n * (M - np.outer(el, el * nu[1:]) / weight_mass(n))
        J = (np.diag(lam[1:]) - rho * De) / scale[1:, None]
    return LinearizedSystem(R, J, dR, e, _norm_weights(n, K))


def jacobian(params: EquationParams, u: SpectralField, rule: QuadratureRule) -> np.ndarray:
    """Unpreconditioned Jacobian ``dF_k/da_l`` for k, l = 1..K."""
    sys_ = linearize(params.n, params.rho, u, rule)
    lam = paneitz_eigenvalues(params.n, u.K)[1:]
    return sys_.J * (params.alpha * lam + math.factorial(params.n))[:, None]


def _is_even(u: SpectralField) -> bool:
    return bool(np.all(u.coeffs[1::2] == 0.0))


def _lm_step(sys_: LinearizedSystem, idx: np.ndarray, res: float, attempt):
    """Damped Gauss-Newton step on ``|R|^2`` with increasing Marquardt damping."""
    J = sys_.J[np.ix_(idx, idx)]
    W = sys_.weights[idx]
    H = J.T @ (W[:, None] * J)
    g = J.T @ (W * sys_.R[idx])
    d = np.diag(H).copy()
    d[d <= 0] = d.max() if d.max() > 0 else 1.0
    for mu in 10.0 ** np.arange(-8, 9):
        try:
            s = -np.linalg.solve(H + mu * np.diag(d), g)
        except np.linalg.LinAlgError:
            continue
        trial, trial_res = attempt(s, 1.0)
        if trial_res < res:
            return trial
    return None


def _attempt(n, rho, u, rule, active, direction, t):
    c = u.coeffs.copy()
    c[active] += t * direction
    trial = SpectralField(u.spec, c)
    try:
        return trial, linearize(n, rho, trial, rule, with_jacobian=False).norm()
    except OverflowError:
        return trial, math.inf


def newton_solve(
    params: EquationParams,
    init: SpectralField,
    opts: NewtonOptions | None = None,
    rule: QuadratureRule | None = None,
) -> SolutionPoint:
    """Damped Newton on the preconditioned residual, starting from ``init`` (mean removed).

    The step length is halved from 1 until the residual norm satisfies a sufficient
    decrease condition, down to ``min_step``; past that a Levenberg-Marquardt step is
    tried. With ``opts.refine`` a converged iterate whose top quarter of modes holds
    more than ``tail_tol`` of the energy is padded to 2K and iterated further, so
    discrete solutions that the basis does not resolve are not returned.
    """
    opts = opts or NewtonOptions()
    if init.n != params.n:
        raise DomainError(f"dimension mismatch: params n={params.n}, init n={init.n}")
    rule = rule or default_rule(init.spec)
    n, rho = params.n, params.rho
    u = init.with_mean(0.0)
    even = opts.symmetry == "even" or (opts.symmetry == "auto" and _is_even(u))
    if even:
        u = SpectralField(u.spec, np.where(np.arange(u.K + 1) % 2 == 1, 0.0, u.coeffs))

    history: list[float] = []
    it = 0
    while True:
        active = np.arange(1, u.K + 1)
        if even:
            active = active[active % 2 == 0]
        idx = active - 1
        try:
            sys_ = linearize(n, rho, u, rule)
        except OverflowError as exc:
            raise NewtonFailure(f"overflow at iterate: {exc}", history, u) from exc
        res = sys_.norm()
        history.append(res)
        while res > opts.tol:
            if it >= opts.max_iter:
                raise NewtonFailure(
                    f"no convergence in {opts.max_iter} iterations (residual {res:.3e})", history, u
                )
            it += 1
            try:
                step = -lu_solve(lu_factor(sys_.J[np.ix_(idx, idx)]), sys_.R[idx])
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NewtonFailure(f"singular Jacobian at iteration {it}", history, u) from exc
            if not np.all(np.isfinite(step)):
                raise NewtonFailure(f"non-finite Newton step at iteration {it}", history, u)
            t = 1.0
            while True:
                trial, trial_res = _attempt(n, rho, u, rule, active, step, t)
                if trial_res <= (1.0 - opts.armijo * t) * res or trial_res <= opts.tol:
                    break
                t *= opts.backtrack
                if t < opts.min_step:
                    trial = None
                    break
            if trial is None and opts.lm_fallback:
                trial = _lm_step(sys_, idx, res, lambda d, t: _attempt(n, rho, u, rule, active, d, t))
            if trial is None:
                raise NewtonFailure(f"line search failed at iteration {it} (residual {res:.3e})", history, u)
            u = trial
            sys_ = linearize(n, rho, u, rule)
            res = sys_.norm()
            history.append(res)
        if not opts.refine or tail_fraction(u) <= opts.tail_tol:
            break
        if u.K >= opts.K_max:
            raise NewtonFailure(f"converged iterate is not resolved at K={u.K}", history, u)
        u = u.resized(min(2 * u.K, opts.K_max))
        rule = default_rule(u.spec)
    return make_solution(params, u, rule, iterations=it)


def jacobian_spectrum_at_zero(params: EquationParams, K: int) -> np.ndarray:
    """``alpha lambda_k - n!`` for k = 1..K: the linearization at u = 0 is diagonal."""
    lam = paneitz_eigenvalues(params.n, K)[1:]
    return params.alpha * lam - math.factorial(params.n)


def assembled_spectrum_at_zero(params: EquationParams, K: int, rule: QuadratureRule | None = None) -> np.ndarray:
    """Sorted eigenvalues of the pseudo-spectrally assembled Jacobian at u = 0."""
    spec = BasisSpec(params.n, K)
    Jm = jacobian(params, SpectralField.zeros(spec), rule or default_rule(spec))
    return eigvalsh(0.5 * (Jm + Jm.T))


class SolutionClass(enum.Enum):
    Constant = "constant"
    NonConstant = "non-constant"


def classify(sol: SolutionPoint) -> SolutionClass:
    """Constant iff ``sum_{k>=1} a_k^2 nu_k <= 1e-16``."""
    u = sol.u
    energy = float(np.sum(u.coeffs[1:] ** 2 * basis_norms(u.n, u.K)[1:]))
    return SolutionClass.Constant if energy <= CONSTANT_THRESHOLD else SolutionClass.NonConstant
