"""Paneitz operator, equation residual, functionals and G-derived quantities.

The reduced equation for an axially symmetric u(x) on S^n is

    alpha P_n u + (n-1)! - (n-1)! nu_0 e^{nu} / gamma = 0,
    gamma = int_{-1}^{1} (1-x^2)^((n-2)/2) e^{nu} dx,

with ``nu_0`` the weight mass. In the hat basis P_n acts diagonally by
``lambda_k = prod_{s<n} (k+s)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import (
    BasisSpec,
    DomainError,
    QuadratureRule,
    SpectralField,
    analysis_matrix,
    basis_norms,
    build_quadrature,
    default_quad_size,
    derivative,
    g_map,
    mul_one_minus_x2,
    paneitz_eigenvalues,
    synthesis_matrix,
    synthesize,
    weight_mass,
)

__all__ = [
    "EquationParams",
    "Diagnostics",
    "SolutionPoint",
    "GQuantities",
    "GradientMargin",
    "PreconditionError",
    "default_rule",
    "apply_paneitz",
    "apply_paneitz_differential",
    "gamma",
    "log_gamma",
    "density",
    "residual",
    "preconditioned_residual",
    "residual_norm",
    "functional_J",
    "functional_I",
    "functional_scriptJ",
    "first_momentum",
    "g_quantities",
    "gradient_bound_check",
    "normalized",
    "make_solution",
    "polish",
    "extremal_field",
    "tail_fraction",
    "L_INF_GRID",
]

L_INF_GRID = np.linspace(-1.0, 1.0, 2001)


class PreconditionError(ValueError):
    """Input does not satisfy an operation's stated precondition."""


@dataclass(frozen=True)
class EquationParams:
    """Dimension ``n`` and coupling ``alpha``; ``rho = (n-1)!/alpha``."""

    n: int
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError("alpha must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def from_rho(cls, n: int, rho: float) -> "EquationParams":
        if not (math.isfinite(rho) and rho > 0):
            raise DomainError("rho must be positive")
        return cls(n, math.factorial(n - 1) / rho)

    @property
    def rho(self) -> float:
        return math.factorial(self.n - 1) / self.alpha


@dataclass(frozen=True)
class Diagnostics:
    l_inf: float
    beta: float
    gamma: float
    mean_shift: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SolutionPoint:
    """A solved ``(alpha, u)`` pair, u in the zero-mean gauge."""

    params: EquationParams
    u: SpectralField
    residual_norm: float
    diagnostics: Diagnostics
    iterations: int = 0

    @property
    def gauge(self) -> str:
        return "zero-mean"


def _check_rule(u: SpectralField, rule: QuadratureRule) -> None:
    if rule.n != u.n:
        raise DomainError(f"dimension mismatch: rule n={rule.n}, field n={u.n}")
    if rule.Q < u.K + 1:
        raise PreconditionError(f"quadrature with Q={rule.Q} cannot resolve K={u.K}")


def default_rule(spec: BasisSpec) -> QuadratureRule:
    return build_quadrature(spec.n, default_quad_size(spec))


# ---------------------------------------------------------------------------
# operator


def apply_paneitz(u: SpectralField) -> SpectralField:
    """Diagonal action ``a_k -> lambda_k a_k``."""
    return SpectralField(u.spec, paneitz_eigenvalues(u.n, u.K) * u.coeffs)


def apply_paneitz_differential(u: SpectralField) -> SpectralField:
    """``(-1)^(n/2) [(1-x^2)^(n/2) u']^(n-1)`` by exact coefficient operations (even n)."""
    n = u.n
    if n % 2:
        raise DomainError("the differential form of P_n is only available for even n")
    f = mul_one_minus_x2(derivative(u), n // 2)
    for _ in range(n - 1):
        f = derivative(f)
    return (-1.0) ** (n // 2) * f.resized(u.K)


# ---------------------------------------------------------------------------
# nonlinear term


def _node_values(u: SpectralField, rule: QuadratureRule) -> np.ndarray:
    _check_rule(u, rule)
    vals = synthesis_matrix(rule, u.K).T @ u.coeffs
    if not np.all(np.isfinite(vals)):
        raise OverflowError("non-finite field values at quadrature nodes")
    return vals


def _scaled_exp(u: SpectralField, rule: QuadratureRule):
    """``e^{n(u - M)}`` at nodes, its weighted sum and the shift ``M = max u``."""
    vals = _node_values(u, rule)
    M = float(vals.max())
    e = np.exp(u.n * (vals - M))
    return vals, e, rule.integrate(e), M


def log_gamma(u: SpectralField, rule: QuadratureRule) -> float:
    _, _, s, M = _scaled_exp(u, rule)
    return math.log(s) + u.n * M


def gamma(n: int, u: SpectralField, rule: QuadratureRule) -> float:
    """``int w e^{nu} dx`` by quadrature."""
    if n != u.n:
        raise DomainError(f"dimension mismatch: n={n}, field n={u.n}")
    lg = log_gamma(u, rule)
    if lg > 700.0:
        raise OverflowError(f"gamma overflows (log gamma = {lg:.1f})")
    return math.exp(lg)


def density(u: SpectralField, rule: QuadratureRule) -> np.ndarray:
    """Normalized density ``nu_0 e^{nu} / gamma`` at the nodes (unit sphere average)."""
    _, e, s, _ = _scaled_exp(u, rule)
    return weight_mass(u.n) * e / s


def residual(params: EquationParams, u: SpectralField, rule: QuadratureRule) -> SpectralField:
    """Spectral residual ``F_k = alpha lambda_k a_k + (n-1)! delta_k0 - (n-1)! e_k``.

    ``e_k`` are the hat coefficients of the normalized density; ``F_0`` vanishes up to
    quadrature rounding.
    """
    if params.n != u.n:
        raise DomainError(f"dimension mismatch: params n={params.n}, field n={u.n}")
    n = params.n
    fact = math.factorial(n - 1)
    _, ex, _, _ = _scaled_exp(u, rule)
    raw = analysis_matrix(rule, u.K) @ ex
    # dividing by the zeroth entry normalizes with the same summation as e_0
    e = raw / raw[0]
    F = params.alpha * paneitz_eigenvalues(n, u.K) * u.coeffs - fact * e
    F[0] += fact
    return SpectralField(u.spec, F)


def preconditioned_residual(params: EquationParams, F: SpectralField) -> np.ndarray:
    """``F_k / (alpha lambda_k + n!)``."""
    scale = params.alpha * paneitz_eigenvalues(F.n, F.K) + math.factorial(F.n)
    return F.coeffs / scale


def residual_norm(params: EquationParams, F: SpectralField) -> float:
    """Normalized-L2 norm of the preconditioned residual over modes 1..K."""
    R = preconditioned_residual(params, F)
    w = basis_norms(F.n, F.K) / weight_mass(F.n)
    return float(math.sqrt(np.sum(w[1:] * R[1:] ** 2)))


# ---------------------------------------------------------------------------
# functionals


def _quadratic_term(params: EquationParams, u: SpectralField) -> float:
    n = u.n
    lam = paneitz_eigenvalues(n, u.K)
    nu = basis_norms(n, u.K)
    return 0.5 * params.alpha * float(np.sum(lam * u.coeffs**2 * nu)) / weight_mass(n)


def functional_J(params: EquationParams, u: SpectralField, rule: QuadratureRule) -> float:
    """Sphere-normalized functional ``(alpha/2)<P u, u> + (n-1)! mean(u) - ((n-1)!/n) ln mean(e^{nu})``."""
    n = u.n
    fact = math.factorial(n - 1)
    log_mass = log_gamma(u, rule) - math.log(weight_mass(n))
    return _quadratic_term(params, u) + fact * u.coeffs[0] - fact / n * log_mass


def functional_I(params: EquationParams, u: SpectralField, rule: QuadratureRule) -> float:
    """One-dimensional form on [-1, 1]: ``nu_0 J``."""
    return weight_mass(u.n) * functional_J(params, u, rule)


def first_momentum(u: SpectralField, rule: QuadratureRule) -> float:
    """``int x w e^{nu} dx / gamma``: the x-momentum of the normalized density."""
    vals, e, s, _ = _scaled_exp(u, rule)
    return rule.integrate(rule.nodes * e) / s


def functional_scriptJ(params: EquationParams, u: SpectralField, rule: QuadratureRule) -> float:
    """Momentum-corrected functional, log term ``-((n-1)!/(2n)) ln(m^2 - p^2)``.

    ``m`` and ``p`` are the sphere averages of ``e^{nu}`` and ``x e^{nu}``.
    """
    n = u.n
    fact = math.factorial(n - 1)
    p = first_momentum(u, rule)
    arg = 1.0 - p * p
    if not arg > 0.0:
        raise DomainError("momentum is not smaller than mass; log argument non-positive")
    log_mass = log_gamma(u, rule) - math.log(weight_mass(n))
    log_arg = 2.0 * log_mass + math.log(arg)
    return _quadratic_term(params, u) + fact * u.coeffs[0] - fact / (2 * n) * log_arg


# ---------------------------------------------------------------------------
# G quantities


@dataclass(frozen=True, eq=False)
class GQuantities:
    G: SpectralField
    beta: float
    seminorm_sq: float
    momentum: float
    momentum_normalized: float


def g_quantities(u: SpectralField, rule: QuadratureRule) -> GQuantities:
    """``G = (1-x^2)u'``, its first coefficient beta, ``|G|^2 = sum lambda_k d_k^2 nu_k`` and the x-momentum."""
    if rule.Q >= u.K + 2:
        G = g_map(u, rule)
    else:
        G = mul_one_minus_x2(derivative(u)).resized(u.K + 1)
    d = G.coeffs
    lam = paneitz_eigenvalues(u.n, G.K)
    nu = basis_norms(u.n, G.K)
    semi = float(np.sum(lam[1:] * d[1:] ** 2 * nu[1:]))
    p = first_momentum(u, rule)
    return GQuantities(G, float(d[1]), semi, p * math.exp(log_gamma(u, rule)), p)


@dataclass(frozen=True)
class GradientMargin:
    j: int
    max_value: float
    bound: float
    margin: float

    @property
    def ok(self) -> bool:
        return self.margin >= -1e-6 * self.bound


def gradient_bound_check(
    params: EquationParams,
    u: SpectralField,
    rule: QuadratureRule,
    grid: np.ndarray | None = None,
    require_converged: bool = True,
) -> list[GradientMargin]:
    """Margins ``(2j+1)!/alpha - max G_j`` for ``G_j = (-1)^j [(1-x^2)^j G]^(2j+1)``, j < n/2.

    Derivatives are exact in coefficient space; maxima are taken over ``grid``
    (2001 uniform points by default).
    """
    if require_converged:
        rn = residual_norm(params, residual(params, u, rule))
        if rn > 1e-9:
            raise PreconditionError(f"field is not a converged solution (residual {rn:.2e})")
    x = L_INF_GRID if grid is None else np.asarray(grid, dtype=float)
    G = mul_one_minus_x2(derivative(u))
    out = []
    for j in range(u.n // 2):
        H = mul_one_minus_x2(G, j)
        for _ in range(2 * j + 1):
            H = derivative(H)
        vals = (-1.0) ** j * synthesize(H, x)
        bound = math.factorial(2 * j + 1) / params.alpha
        mx = float(vals.max())
        out.append(GradientMargin(j, mx, bound, bound - mx))
    return out


# ---------------------------------------------------------------------------
# solution bookkeeping


def normalized(u: SpectralField, rule: QuadratureRule) -> SpectralField:
    """Representative ``u + c`` with unit sphere average of ``e^{nu}``."""
    shift = -(log_gamma(u, rule) - math.log(weight_mass(u.n))) / u.n
    return u.with_mean(u.coeffs[0] + shift)


def make_solution(
    params: EquationParams, u: SpectralField, rule: QuadratureRule, iterations: int = 0
) -> SolutionPoint:
    """Wrap a zero-mean field with its residual norm and diagnostics."""
    u = u.with_mean(0.0)
    F = residual(params, u, rule)
    lg = log_gamma(u, rule)
    gq = g_quantities(u, rule)
    diag = Diagnostics(
        l_inf=float(np.max(np.abs(synthesize(u, L_INF_GRID)))),
        beta=gq.beta,
        gamma=math.exp(lg) if lg < 700.0 else math.inf,
        mean_shift=-(lg - math.log(weight_mass(u.n))) / u.n,
    )
    return SolutionPoint(params, u, residual_norm(params, F), diag, iterations)


def polish(params: EquationParams, u: SpectralField, rule: QuadratureRule, sweeps: int = 2) -> SpectralField:
    """Fixed-point sweeps ``a_k <- rho e_k / lambda_k`` on modes k >= 2.

    At a solution this is the identity; on a projected closed form it replaces
    rounding noise in the high coefficients by values damped by ``1/lambda_k``,
    which matters once many derivatives are taken.
    """
    lam = paneitz_eigenvalues(u.n, u.K)
    for _ in range(sweeps):
        _, ex, _, _ = _scaled_exp(u, rule)
        raw = analysis_matrix(rule, u.K) @ ex
        c = u.coeffs.copy()
        c[2:] = params.rho * (raw[2:] / raw[0]) / lam[2:]
        u = SpectralField(u.spec, c)
    return u


def extremal_field(n: int, a: float, K: int = 96) -> SpectralField:
    """Zero-mean projection of ``-ln(1 - a x)``, the alpha = 1 solution family, polished."""
    spec = BasisSpec(n, K)
    rule = default_rule(spec)
    u = SpectralField(spec, analysis_matrix(rule, K) @ -np.log1p(-a * rule.nodes)).with_mean(0.0)
    return polish(EquationParams(n, 1.0), u, rule)


def tail_fraction(u: SpectralField) -> float:
    """Share of ``sum_{k>=1} a_k^2 nu_k`` carried by the top quarter of the modes."""
    e = u.coeffs**2 * basis_norms(u.n, u.K)
    total = float(e[1:].sum())
    if total == 0.0:
        return 0.0
    return float(e[int(0.75 * u.K) + 1 :].sum()) / total
