"""Hat-normalized Gegenbauer basis on [-1, 1] for axially symmetric functions on S^n.

Functions u(x), x = xi_1, are expanded as ``u = sum_k a_k C_k(x)`` where ``C_k`` is
the ultraspherical polynomial of order (n-1)/2 rescaled so that ``C_k(1) = 1``.
The natural weight is ``(1 - x^2)^((n-2)/2)``.

All basis constants are built from products of small integers so that nothing
overflows for k up to a few hundred and n <= 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "BasisSpec",
    "QuadratureRule",
    "SpectralField",
    "DomainError",
    "weight_mass",
    "laplace_eigenvalues",
    "paneitz_eigenvalues",
    "basis_norms",
    "gegenbauer_eval",
    "gegenbauer_table",
    "eigenvalues",
    "basis_norm_sq",
    "build_quadrature",
    "default_quad_size",
    "analyze",
    "synthesize",
    "evaluate",
    "derivative",
    "mul_x",
    "mul_one_minus_x2",
    "g_map",
]


class DomainError(ValueError):
    """Argument outside the domain of a basis operation."""


@dataclass(frozen=True)
class BasisSpec:
    n: int
    K: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"sphere dimension must be an integer >= 2, got {self.n}")
        if int(self.K) != self.K or self.K < 2:
            raise DomainError(f"truncation degree must be an integer >= 2, got {self.K}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "K", int(self.K))

    def with_K(self, K: int) -> "BasisSpec":
        return BasisSpec(self.n, K)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Jacobi rule for the weight ``(1 - x^2)^((n-2)/2)``."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes))
        object.__setattr__(self, "weights", _frozen(self.weights))

    @property
    def Q(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> float:
        """Weighted integral of sampled values."""
        return float(np.dot(self.weights, values))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients ``a_0..a_K`` of an axially symmetric function."""

    spec: BasisSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (self.spec.K + 1,):
            raise DomainError(
                f"expected {self.spec.K + 1} coefficients for K={self.spec.K}, got shape {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def K(self) -> int:
        return self.spec.K

    @classmethod
    def zeros(cls, spec: BasisSpec) -> "SpectralField":
        return cls(spec, np.zeros(spec.K + 1))

    @classmethod
    def mode(cls, spec: BasisSpec, k: int, amplitude: float = 1.0) -> "SpectralField":
        c = np.zeros(spec.K + 1)
        c[k] = amplitude
        return cls(spec, c)

    def resized(self, K: int) -> "SpectralField":
        """Zero-pad or truncate to degree K."""
        c = np.zeros(K + 1)
        m = min(K, self.K) + 1
        c[:m] = self.coeffs[:m]
        return SpectralField(self.spec.with_K(K), c)

    def with_mean(self, a0: float) -> "SpectralField":
        c = self.coeffs.copy()
        c[0] = a0
        return SpectralField(self.spec, c)

    def flipped(self) -> "SpectralField":
        """Coefficients of u(-x)."""
        sign = (-1.0) ** np.arange(self.K + 1)
        return SpectralField(self.spec, sign * self.coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_n(self, other)
        K = max(self.K, other.K)
        return SpectralField(self.spec.with_K(K), self.resized(K).coeffs + other.resized(K).coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.spec, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __call__(self, x):
        return synthesize(self, x)


def _check_same_n(a: SpectralField, b: SpectralField) -> None:
    if a.n != b.n:
        raise DomainError(f"dimension mismatch: n={a.n} vs n={b.n}")


# ---------------------------------------------------------------------------
# basis constants


@lru_cache(maxsize=None)
def weight_mass(n: int) -> float:
    """``int_{-1}^{1} (1-x^2)^((n-2)/2) dx = sqrt(pi) Gamma(n/2) / Gamma((n+1)/2)``."""
    if n < 2:
        raise DomainError("n must be >= 2")
    # two-step recursion in n: mass(n) = mass(n-2) * (n-2)/(n-1)
    if n % 2 == 0:
        m, start = 2.0, 2
    else:
        m, start = math.pi / 2.0, 3
    for j in range(start + 2, n + 1, 2):
        m *= (j - 2) / (j - 1)
    return m


def laplace_eigenvalues(n: int, K: int) -> np.ndarray:
    """``k (k + n - 1)`` for k = 0..K."""
    k = np.arange(K + 1, dtype=float)
    return k * (k + n - 1)


def paneitz_eigenvalues(n: int, K: int) -> np.ndarray:
    """``prod_{s=0}^{n-1} (k + s)`` for k = 0..K."""
    k = np.arange(K + 1, dtype=float)
    lam = np.ones(K + 1)
    for s in range(n):
        lam *= k + s
    if not np.all(np.isfinite(lam)):
        raise OverflowError(f"Paneitz eigenvalue overflow for n={n}, K={K}")
    return lam


def basis_norms(n: int, K: int) -> np.ndarray:
    """Weighted squared norms ``int w C_k^2`` for k = 0..K.

    Uses ``(n-1)! m_n / ((2k+n-1) prod_{s=1}^{n-2}(k+s))`` with ``m_n`` the weight mass;
    at k = 0 this reduces to ``m_n``.
    """
    k = np.arange(K + 1, dtype=float)
    denom = 2.0 * k + n - 1
    for s in range(1, n - 1):
        denom = denom * (k + s)
    return math.factorial(n - 1) * weight_mass(n) / denom


def _check_degree(spec: BasisSpec, k: int) -> None:
    if k < 0 or k > spec.K:
        raise DomainError(f"degree {k} outside 0..{spec.K}")


def _check_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise DomainError("evaluation point outside [-1, 1]")
    return x


def gegenbauer_table(n: int, K: int, x, deriv: int = 0) -> np.ndarray:
    """Values of ``C_k^{(deriv)}(x)`` for k = 0..K, shape ``(K+1,) + x.shape``.

    Uses ``(k+n-1) C_{k+1} = (2k+n-1) x C_k - k C_{k-1}`` and its derivatives.
    """
    x = np.asarray(x, dtype=float)
    tabs = []
    for m in range(deriv + 1):
        T = np.zeros((K + 1,) + x.shape)
        if m == 0:
            T[0] = 1.0
        prev = tabs[m - 1] if m else None
        if K >= 1:
            T[1] = x * T[0] + (m * prev[0] if m else 0.0)
        for k in range(1, K):
            rhs = (2 * k + n - 1) * (x * T[k] + (m * prev[k] if m else 0.0)) - k * T[k - 1]
            T[k + 1] = rhs / (k + n - 1)
        tabs.append(T)
    return tabs[deriv]


def gegenbauer_eval(spec: BasisSpec, k: int, x) -> float | np.ndarray:
    """Hat-normalized Gegenbauer polynomial ``C_k(x)`` with ``C_k(1) = 1``."""
    _check_degree(spec, k)
    x = _check_points(x)
    val = gegenbauer_table(spec.n, max(k, 1), x)[k]
    return float(val) if val.ndim == 0 else val


def eigenvalues(spec: BasisSpec, k: int) -> tuple[float, float]:
    """Laplace eigenvalue ``k(k+n-1)`` and Paneitz eigenvalue ``prod_{s<n}(k+s)``."""
    if k < 0:
        raise DomainError("degree must be non-negative")
    lam = 1.0
    for s in range(spec.n):
        lam *= k + s
    if not math.isfinite(lam):
        raise OverflowError(f"Paneitz eigenvalue overflow at k={k}")
    return float(k * (k + spec.n - 1)), float(lam)


def basis_norm_sq(spec: BasisSpec, k: int) -> float:
    if k < 0:
        raise DomainError("degree must be non-negative")
    return float(basis_norms(spec.n, k)[k])


# ---------------------------------------------------------------------------
# quadrature


def _jacobi_beta(n: int, Q: int) -> np.ndarray:
    # monic recurrence coefficients beta_k, k = 1..Q-1, for the symmetric weight
    k = np.arange(1, Q, dtype=float)
    return k * (k + n - 2) / ((2 * k + n - 1) * (2 * k + n - 3))


def _orthonormal_table(n: int, Q: int, x: np.ndarray, beta: np.ndarray):
    """Orthonormal polynomials p_0..p_Q at x and p_Q' (for Newton refinement)."""
    sb = np.sqrt(np.concatenate([[0.0], beta, _jacobi_beta(n, Q + 1)[-1:]]))
    P = np.zeros((Q + 1, x.size))
    dP = np.zeros((Q + 1, x.size))
    P[0] = 1.0 / math.sqrt(weight_mass(n))
    for k in range(Q):
        nxt = x * P[k] - (sb[k] * P[k - 1] if k else 0.0)
        dnxt = P[k] + x * dP[k] - (sb[k] * dP[k - 1] if k else 0.0)
        P[k + 1] = nxt / sb[k + 1]
        dP[k + 1] = dnxt / sb[k + 1]
    return P, dP


@lru_cache(maxsize=64)
def build_quadrature(n: int, Q: int) -> QuadratureRule:
    """Q-point Gauss-Jacobi rule with parameters a = b = (n-2)/2.

    Nodes come from the eigenvalues of the symmetric Jacobi matrix and are polished
    by one Newton step on the degree-Q orthonormal polynomial; weights are the
    Christoffel numbers ``1 / sum_{j<Q} p_j(x)^2``.
    """
    if Q < 1:
        raise DomainError("quadrature needs at least one node")
    if n < 2:
        raise DomainError("n must be >= 2")
    beta = _jacobi_beta(n, Q)
    if Q == 1:
        x = np.zeros(1)
    else:
        try:
            x = eigh_tridiagonal(np.zeros(Q), np.sqrt(beta), eigvals_only=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise RuntimeError(f"Jacobi matrix eigensolver failed for n={n}, Q={Q}") from exc
    P, dP = _orthonormal_table(n, Q, x, beta)
    x = x - P[Q] / dP[Q]
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) >= 1.0):
        raise RuntimeError(f"Gauss-Jacobi node refinement diverged for n={n}, Q={Q}")
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])
    P, _ = _orthonormal_table(n, Q, x, beta)
    w = 1.0 / np.sum(P[:Q] ** 2, axis=0)
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(n, x, w)


def default_quad_size(spec: BasisSpec) -> int:
    """Oversampled node count 2K + n used for all nonlinear evaluations."""
    return 2 * spec.K + spec.n


@lru_cache(maxsize=64)
def _analysis_matrix(n: int, K: int, Q: int) -> np.ndarray:
    rule = build_quadrature(n, Q)
    V = gegenbauer_table(n, K, rule.nodes)
    A = V * rule.weights / basis_norms(n, K)[:, None]
    A.setflags(write=False)
    return A


@lru_cache(maxsize=64)
def _synthesis_matrix(n: int, K: int, Q: int) -> np.ndarray:
    V = gegenbauer_table(n, K, build_quadrature(n, Q).nodes)
    V.setflags(write=False)
    return V


def _is_cached_rule(rule: QuadratureRule) -> bool:
    return build_quadrature(rule.n, rule.Q) is rule


def analysis_matrix(rule: QuadratureRule, K: int) -> np.ndarray:
    """Matrix mapping node values to coefficients 0..K."""
    if _is_cached_rule(rule):
        return _analysis_matrix(rule.n, K, rule.Q)
    V = gegenbauer_table(rule.n, K, rule.nodes)
    return V * rule.weights / basis_norms(rule.n, K)[:, None]


def synthesis_matrix(rule: QuadratureRule, K: int) -> np.ndarray:
    """``C_k(x_q)``, shape (K+1, Q)."""
    if _is_cached_rule(rule):
        return _synthesis_matrix(rule.n, K, rule.Q)
    return gegenbauer_table(rule.n, K, rule.nodes)


def analyze(rule: QuadratureRule, values, spec: BasisSpec) -> SpectralField:
    """Project node values onto C_0..C_K by weighted quadrature."""
    if rule.n != spec.n:
        raise DomainError(f"dimension mismatch: rule n={rule.n}, basis n={spec.n}")
    values = np.asarray(values, dtype=float)
    if values.shape != (rule.Q,):
        raise DomainError(f"expected {rule.Q} node values, got shape {values.shape}")
    return SpectralField(spec, analysis_matrix(rule, spec.K) @ values)


def synthesize(field: SpectralField, points) -> np.ndarray:
    """Evaluate ``sum_k a_k C_k(x)`` in one pass of the three-term recurrence."""
    x = _check_points(points)
    n, a = field.n, field.coeffs
    prev = np.ones_like(x)
    total = a[0] * prev
    cur = x.copy()
    total = total + a[1] * cur
    for k in range(1, field.K):
        prev, cur = cur, ((2 * k + n - 1) * x * cur - k * prev) / (k + n - 1)
        total = total + a[k + 1] * cur
    return total


def evaluate(field: SpectralField, points, deriv: int = 0) -> np.ndarray:
    """Values of the ``deriv``-th derivative at the given points."""
    f = field
    for _ in range(deriv):
        f = derivative(f)
    return synthesize(f, points)


# ---------------------------------------------------------------------------
# exact coefficient-space operators


def _hat_scale(n: int, K: int) -> np.ndarray:
    # C_k^{(n-1)/2}(1) = Gamma(k+n-1) / (k! Gamma(n-1)), built incrementally
    h = np.ones(K + 1)
    for k in range(1, K + 1):
        h[k] = h[k - 1] * (k + n - 2) / k
    return h


def derivative(field: SpectralField) -> SpectralField:
    """Exact derivative, same truncation K (top coefficient becomes 0)."""
    n, K = field.n, field.K
    h = _hat_scale(n, K)
    A = field.coeffs / h
    B = np.zeros(K + 2)
    # classical coefficients: B_k = (2k+n-1) (A_{k+1} + B_{k+2} / (2k+n+3))
    for k in range(K - 1, -1, -1):
        B[k] = (2 * k + n - 1) * (A[k + 1] + B[k + 2] / (2 * k + n + 3))
    return SpectralField(field.spec, B[: K + 1] * h)


def mul_x(field: SpectralField) -> SpectralField:
    """Coefficients of ``x u(x)``; the result has degree K+1."""
    n, K = field.n, field.K
    a = field.coeffs
    out = np.zeros(K + 2)
    k = np.arange(K + 1, dtype=float)
    denom = 2 * k + n - 1
    # x C_k = ((k+n-1) C_{k+1} + k C_{k-1}) / (2k+n-1)
    out[1:] += a * (k + n - 1) / denom
    out[:-2] += (a * k / denom)[1:]
    return SpectralField(field.spec.with_K(K + 1), out)


def mul_one_minus_x2(field: SpectralField, power: int = 1) -> SpectralField:
    """Coefficients of ``(1-x^2)^power u(x)``; degree grows by 2*power."""
    f = field
    for _ in range(power):
        xx = mul_x(mul_x(f))
        f = f.resized(xx.K) - xx
    return f


def g_map(u: SpectralField, rule: QuadratureRule) -> SpectralField:
    """Field of ``G = (1-x^2) u'`` truncated at degree K+1.

    The derivative is taken exactly in coefficient space; the factor ``(1-x^2)`` is
    applied at the quadrature nodes and the product re-analyzed.
    """
    if rule.n != u.n:
        raise DomainError(f"dimension mismatch: rule n={rule.n}, field n={u.n}")
    du = derivative(u)
    out_spec = u.spec.with_K(u.K + 1)
    vals = (1.0 - rule.nodes**2) * (synthesis_matrix(rule, u.K).T @ du.coeffs)
    return analyze(rule, vals, out_spec)
