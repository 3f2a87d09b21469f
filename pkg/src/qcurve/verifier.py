"""Executable checks of the integral identities, inequalities and thresholds.

Every polynomial integrand is built by exact coefficient-space operations
(derivatives, multiplication by powers of 1-x^2) and integrated with a Gauss rule
of sufficient degree, so the polynomial identities are checked to rounding.
Checks that involve a computed solution are limited by the solution accuracy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .paneitz import (
    EquationParams,
    PreconditionError,
    SolutionPoint,
    default_rule,
    extremal_field,
    first_momentum,
    functional_I,
    functional_J,
    functional_scriptJ,
    gradient_bound_check,
    log_gamma,
    make_solution,
    residual,
    residual_norm,
)
from .spectral import (
    BasisSpec,
    DomainError,
    QuadratureRule,
    SpectralField,
    analyze,
    basis_norms,
    build_quadrature,
    derivative,
    gegenbauer_table,
    laplace_eigenvalues,
    mul_one_minus_x2,
    paneitz_eigenvalues,
    synthesize,
    weight_mass,
)

__all__ = [
    "Case",
    "VerificationReport",
    "random_g",
    "random_field",
    "check_appendix_A",
    "check_appendix_B",
    "check_decompositions",
    "check_lemma_equality",
    "check_key_equation_and_estimates",
    "check_gradient",
    "check_momenta",
    "thresholds",
    "threshold_report",
    "project_to_balanced",
    "sampled_inequalities",
    "SOLUTION_RTOL",
    "SUITES",
    "UniquenessScan",
    "random_init",
    "uniqueness_scan",
    "reference_solutions",
    "run_suite",
    "suites_for",
]

SOLUTION_RTOL = 1e-7


@dataclass
class Case:
    """One check. ``mode`` is ``rel``, ``abs``, ``ineq`` (``lhs <= rhs``), ``info`` or ``skip``."""

    id: str
    lhs: float
    rhs: float
    defect: float
    tolerance: float
    mode: str = "rel"
    passed: bool = True
    note: str = ""


@dataclass
class VerificationReport:
    suite: str
    seed: int | None = None
    cases: list[Case] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def failures(self) -> list[Case]:
        return [c for c in self.cases if not c.passed]

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.cases.extend(other.cases)
        return self

    def equality(self, id: str, lhs: float, rhs: float, tol: float, scale: float | None = None, note: str = "") -> Case:
        """Relative equality ``|lhs - rhs| <= tol * scale``; scale defaults to ``max(|lhs|, |rhs|)``."""
        if scale is None:
            scale = max(abs(lhs), abs(rhs))
        diff = abs(lhs - rhs)
        defect = diff / scale if scale > 0 else diff
        c = Case(id, float(lhs), float(rhs), float(defect), tol, "rel", bool(defect <= tol), note)
        self.cases.append(c)
        return c

    def absolute(self, id: str, value: float, tol: float, note: str = "") -> Case:
        c = Case(id, float(value), 0.0, float(abs(value)), tol, "abs", bool(abs(value) <= tol), note)
        self.cases.append(c)
        return c

    def inequality(self, id: str, lhs: float, rhs: float, tol: float, scale: float = 1.0, note: str = "") -> Case:
        """``lhs <= rhs`` up to ``tol * scale``; defect is the scaled violation."""
        viol = max(0.0, lhs - rhs) / scale if scale > 0 else max(0.0, lhs - rhs)
        c = Case(id, float(lhs), float(rhs), float(viol), tol, "ineq", bool(viol <= tol), note)
        self.cases.append(c)
        return c

    def info(self, id: str, value: float, note: str = "") -> Case:
        c = Case(id, float(value), math.nan, 0.0, math.inf, "info", True, note)
        self.cases.append(c)
        return c

    def skip(self, id: str, note: str) -> Case:
        c = Case(id, math.nan, math.nan, 0.0, math.inf, "skip", True, note)
        self.cases.append(c)
        return c

    def to_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed, "cases": [asdict(c) for c in self.cases]}

    def to_json(self) -> str:
        from .io import dumps_json

        return dumps_json(self.to_dict())

    def summary(self) -> str:
        bad = len(self.failures)
        return f"{self.suite}: {len(self.cases) - bad}/{len(self.cases)} passed"


# ---------------------------------------------------------------------------
# polynomial helpers


def _legendre(Q: int) -> QuadratureRule:
    return build_quadrature(2, Q)


def _vals(f: SpectralField, x: np.ndarray) -> np.ndarray:
    return synthesize(f, x)


def _d(f: SpectralField, m: int = 1) -> SpectralField:
    for _ in range(m):
        f = derivative(f)
    return f


def _omx(f: SpectralField, p: int) -> SpectralField:
    return mul_one_minus_x2(f, p) if p > 0 else f


def _lrule_for(G: SpectralField, factors: int, extra: int) -> QuadratureRule:
    """Legendre rule exact for ``factors`` copies of degree(G) plus ``extra``."""
    deg = factors * G.K + extra
    return _legendre(deg // 2 + 1)


def _int(rule: QuadratureRule, *fields_and_powers) -> float:
    """``int (1-x^2)^p prod f_i dx`` on a Legendre rule: arguments are (p, f1, f2, ...)."""
    p, *fs = fields_and_powers
    x = rule.nodes
    v = (1.0 - x * x) ** p
    for f in fs:
        v = v * _vals(f, x)
    return rule.integrate(v)


def random_g(n: int, degree: int, rng: np.random.Generator, vanishing: bool = True) -> SpectralField:
    """Random polynomial G of the given degree.

    With ``vanishing`` (default) ``G = (1-x^2)u'`` for u with hat coefficients in
    [-1, 1], so G(+-1) = 0: the class where the integration-by-parts identities apply.
    Otherwise G itself has hat coefficients in [-1, 1].
    """
    if vanishing:
        if degree < 3:
            raise DomainError("vanishing G needs degree >= 3")
        u = SpectralField(BasisSpec(n, degree - 1), rng.uniform(-1, 1, degree))
        return mul_one_minus_x2(derivative(u)).resized(degree)
    if degree < 2:
        raise DomainError("degree must be >= 2")
    return SpectralField(BasisSpec(n, degree), rng.uniform(-1, 1, degree + 1))


def random_field(n: int, rng: np.random.Generator, K: int = 32, r: float = 0.5) -> SpectralField:
    """Ensemble ``a_k ~ U[-1, 1] r^k``."""
    return SpectralField(BasisSpec(n, K), rng.uniform(-1, 1, K + 1) * r ** np.arange(K + 1))


# ---------------------------------------------------------------------------
# appendix identities


def _appendix_terms_A(G: SpectralField, rule: QuadratureRule | None = None):
    r = rule or _lrule_for(G, 3, 10)
    if 2 * r.Q - 1 < 3 * G.K + 10 or r.n != 2:
        raise PreconditionError(f"Legendre rule with Q={r.Q} is not exact for degree {3 * G.K + 10}")
    H5 = _d(_omx(G, 2), 5)
    G1, G2 = _d(G), _d(G, 2)
    lhs = _int(r, 2, G, G, H5)
    t1 = _int(r, 4, G1, G2, G2)
    t2 = _int(r, 3, G1, G1, G1)
    return lhs, [-5.0 * t1, -80.0 / 3.0 * t2]


def _appendix_terms_B(G: SpectralField, rule: QuadratureRule | None = None):
    r = rule or _lrule_for(G, 3, 14)
    if 2 * r.Q - 1 < 3 * G.K + 14 or r.n != 2:
        raise PreconditionError(f"Legendre rule with Q={r.Q} is not exact for degree {3 * G.K + 14}")
    H7 = _d(_omx(G, 3), 7)
    G1, G2, G3 = _d(G), _d(G, 2), _d(G, 3)
    P3 = _d(_omx(G, 1), 3)
    lhs = _int(r, 3, G, G, H7)
    terms = [
        1260.0 * _int(r, 4, G1, G1, G1),
        252.0 * _int(r, 5, G1, G2, G2),
        7.0 * _int(r, 6, G1, G3, G3),
        -21.0 * _int(r, 5, P3, G2, G2),
    ]
    return lhs, terms


def check_appendix_A(G: SpectralField, rule: QuadratureRule | None = None, tol: float = 1e-10, id: str = "appendixA") -> VerificationReport:
    """n = 6: ``int (1-x^2)^2 G^2 [(1-x^2)^2 G]^(5) = -5 int (1-x^2)^4 G' G''^2 - (80/3) int (1-x^2)^3 G'^3``.

    Integration by parts needs G(+-1) = 0; for general polynomials the defect is the
    boundary contribution.
    """
    if G.n != 6:
        raise DomainError("the appendixA identity needs n = 6")
    lhs, terms = _appendix_terms_A(G, rule)
    rep = VerificationReport("appendixA")
    scale = max([abs(lhs)] + [abs(t) for t in terms])
    rep.equality(id, lhs, sum(terms), tol, scale=scale if scale > 0 else 1.0)
    return rep


def check_appendix_B(G: SpectralField, rule: QuadratureRule | None = None, tol: float = 1e-10, id: str = "appendixB") -> VerificationReport:
    """n = 8 analogue with the four-term right-hand side."""
    if G.n != 8:
        raise DomainError("the appendixB identity needs n = 8")
    lhs, terms = _appendix_terms_B(G, rule)
    rep = VerificationReport("appendixB")
    scale = max([abs(lhs)] + [abs(t) for t in terms])
    rep.equality(id, lhs, sum(terms), tol, scale=scale if scale > 0 else 1.0)
    return rep


# ---------------------------------------------------------------------------
# decompositions


def _t_sq(G: SpectralField) -> np.ndarray:
    return G.coeffs**2 * basis_norms(G.n, G.K)


def decomposition_sums(G: SpectralField) -> dict[str, float]:
    """Spectral sides of the decompositions, summed over k >= 0."""
    n, K = G.n, G.K
    t2 = _t_sq(G)
    lb = laplace_eigenvalues(n, K)
    lam = paneitz_eigenvalues(n, K)
    out = {
        "G2": float(t2.sum()),
        "G1": float((lb * t2).sum()),
    }
    if n % 2 == 0:
        # lambda_k / lbar_k = Gamma(n+k-1)/Gamma(k+1), also valid at k = 0
        ratio = np.ones(K + 1)
        k = np.arange(K + 1, dtype=float)
        for s in range(1, n - 1):
            ratio *= k + s
        out["Gm"] = float((ratio * t2).sum())
    for j in range(2, n // 2 + 1):
        fac = np.ones(K + 1)
        for i in range(j):
            fac *= lb - i * (i + n - 1)
        out[f"G{j}"] = float((fac * t2).sum())
    if n == 6:
        out["n6_G''"] = float(((lb + 4) * (lb + 6) * t2).sum())
    if n == 8:
        out["n8_G3tilde"] = float(((lb + 6) * (lb + 10) * (lb + 12) * t2).sum())
    return out


def decomposition_integrals(G: SpectralField) -> dict[str, float]:
    """Quadrature sides of the decompositions."""
    n = G.n
    out = {}
    wrule = build_quadrature(n, G.K + n + 2)
    x = wrule.nodes
    out["G2"] = wrule.integrate(_vals(G, x) ** 2)
    out["G1"] = wrule.integrate((1 - x * x) * _vals(_d(G), x) ** 2)
    if n % 2 == 0:
        m = (n - 2) // 2
        H = _d(_omx(G, m), m)
        lr = _legendre(H.K + 2)
        out["Gm"] = lr.integrate(_vals(H, lr.nodes) ** 2)
    for j in range(2, n // 2 + 1):
        out[f"G{j}"] = wrule.integrate((1 - x * x) ** j * _vals(_d(G, j), x) ** 2)
    if n == 6:
        out["n6_G''"] = out["Gm"]
    if n == 8:
        out["n8_G3tilde"] = out["Gm"]
    return out


def check_decompositions(G: SpectralField, rule: QuadratureRule | None = None, tol: float = 1e-10) -> VerificationReport:
    """Each quadrature integral against its spectral sum ``sum f(lbar_k, lambda_k) t_k^2``."""
    rep = VerificationReport("decomp")
    sums = decomposition_sums(G)
    ints = decomposition_integrals(G)
    for key in sums:
        rep.equality(f"decomp[{key}]", ints[key], sums[key], tol)
    return rep


# ---------------------------------------------------------------------------
# solution identities


def _solution_pieces(sol: SolutionPoint, rule: QuadratureRule | None):
    u = sol.u
    rule = rule or default_rule(u.spec)
    G = mul_one_minus_x2(derivative(u))
    return u, rule, G


def _check_converged(sol: SolutionPoint, rule: QuadratureRule, limit: float = 1e-10) -> None:
    rn = residual_norm(sol.params, residual(sol.params, sol.u, rule))
    if rn > limit:
        raise PreconditionError(f"solution residual {rn:.2e} exceeds {limit:.0e}")


def check_lemma_equality(sol: SolutionPoint, rule: QuadratureRule | None = None, tol: float = SOLUTION_RTOL, kmax: int = 8) -> VerificationReport:
    """The four identities tying G, beta and the density together at a solution."""
    u, rule, G = _solution_pieces(sol, rule)
    _check_converged(sol, rule)
    n, alpha = u.n, sol.params.alpha
    rep = VerificationReport("lemma")
    x = rule.nodes
    Gv = _vals(G, x)
    beta = float(G.coeffs[1])
    m = weight_mass(n)
    nu = basis_norms(n, max(kmax, 1))
    lg = log_gamma(u, rule)
    dens = np.exp(n * _vals(u, x) - lg)  # e^{nu} / gamma
    fact = math.factorial(n - 1)

    c1 = nu[1]  # int w x^2 = sqrt(pi) Gamma(n/2) / (2 Gamma((n+3)/2))
    lhs = rule.integrate(x * Gv)
    rep.equality("C1G", lhs, c1 * beta, tol, scale=max(abs(lhs), c1 * abs(beta)) or 1.0)

    lhs = rule.integrate((1 - x * x) * dens)
    rhs = n / (n + 1) * (1 - alpha * beta)
    rep.equality("enu", lhs, rhs, tol, scale=max(abs(lhs), abs(rhs)))

    lam = paneitz_eigenvalues(n, kmax)
    dC = gegenbauer_table(n, kmax, x, deriv=1)
    C = gegenbauer_table(n, kmax, x)
    scale_k = rule.integrate(np.abs(Gv)) + rule.integrate((1 - x * x) * dens) * fact * m / (alpha * lam[2])
    for k in range(2, kmax + 1):
        lhs = rule.integrate(C[k] * Gv)
        rhs = -fact * m / (alpha * lam[k]) * rule.integrate(dens * (1 - x * x) * dC[k])
        rep.equality(f"CkG[k={k}]", lhs, rhs, tol, scale=scale_k)

    if n % 2 == 0:
        mm = (n - 2) // 2
        H = _d(_omx(G, mm), mm)
        lr = _legendre(H.K + 2)
        lhs = lr.integrate(_vals(H, lr.nodes) ** 2)
        const = 2.0 * math.factorial(n - 2) * c1
        rhs = const * (n + 1 - 1 / alpha) * beta
        rep.equality("key-id", lhs, rhs, tol, scale=max(abs(lhs), abs(rhs)) or 1.0)
    else:
        rep.skip("key-id", "requires even n")
    return rep


def key_terms(G: SpectralField, alpha: float) -> dict[str, float]:
    """Integrals entering the key equation and key estimate for n = 6 or 8."""
    n = G.n
    lr = _lrule_for(G, 3, 16)
    lam = paneitz_eigenvalues(n, G.K)
    semi = float(np.sum(lam * G.coeffs**2 * basis_norms(n, G.K)))
    G1, G2, G3 = _d(G), _d(G, 2), _d(G, 3)
    m = n // 2 - 1
    H = _d(_omx(G, m), m)
    out = {"seminorm": semi, "Hm": _int(lr, 0, H, H), "wG2": _int(lr, m, G, G)}
    if n == 6:
        out["G1G2G2"] = _int(lr, 4, G1, G2, G2)
        out["G1^3"] = _int(lr, 3, G1, G1, G1)
        out["wG1^2"] = _int(lr, 3, G1, G1)
    elif n == 8:
        out["G1^3"] = _int(lr, 4, G1, G1, G1)
        out["G1G2G2"] = _int(lr, 5, G1, G2, G2)
        out["G1G3G3"] = _int(lr, 6, G1, G3, G3)
        out["P3G2G2"] = _int(lr, 5, _d(_omx(G, 1), 3), G2, G2)
        out["wG1^2"] = _int(lr, 4, G1, G1)
    else:
        raise DomainError("key equation is stated for n = 6 and n = 8")
    return out


def check_key_equation_and_estimates(sol: SolutionPoint, rule: QuadratureRule | None = None, tol: float = SOLUTION_RTOL) -> VerificationReport:
    u, rule, G = _solution_pieces(sol, rule)
    _check_converged(sol, rule)
    n, alpha = u.n, sol.params.alpha
    T = key_terms(G, alpha)
    rep = VerificationReport("keyeq")
    if n == 6:
        parts = [T["seminorm"], 15 * T["Hm"], -720 / alpha * T["wG2"], -30 * T["G1G2G2"], -160 * T["G1^3"]]
        est_rhs = (30 / alpha - 15) * T["Hm"] - 320 / alpha * T["wG1^2"]
    else:
        bracket = 180 * T["G1^3"] + 36 * T["G1G2G2"] + T["G1G3G3"] - 3 * T["P3G2G2"]
        parts = [T["seminorm"], 28 * T["Hm"], -math.factorial(8) / alpha * T["wG2"], -56 * bracket]
        est_rhs = 28 * (2 / alpha - 1) * T["Hm"] - 20160 / alpha * T["wG1^2"]
    scale = max(abs(p) for p in parts)
    total = sum(parts)
    rep.equality(f"key-eq[n={n}]", total, 0.0, tol, scale=scale or 1.0)
    rep.inequality(f"key-estimate[n={n}]", T["seminorm"], est_rhs, 1e-8, scale=max(abs(T["seminorm"]), abs(est_rhs), 1e-300))
    return rep


def check_gradient(sol: SolutionPoint, rule: QuadratureRule | None = None, grid: np.ndarray | None = None) -> VerificationReport:
    rule = rule or default_rule(sol.u.spec)
    rep = VerificationReport("gradient")
    for gm in gradient_bound_check(sol.params, sol.u, rule, grid=grid):
        rep.inequality(f"G_{gm.j}", gm.max_value, gm.bound, 1e-6, scale=gm.bound)
    return rep


def check_momenta(sol: SolutionPoint, rule: QuadratureRule | None = None, tol: float = 1e-6) -> VerificationReport:
    """Sphere-normalized first momenta of ``e^{nu}`` (unit mass) and of ``u``."""
    u = sol.u
    rule = rule or default_rule(u.spec)
    rep = VerificationReport("momenta")
    m_exp = first_momentum(u, rule)
    m_u = float(u.coeffs[1] * basis_norms(u.n, 1)[1] / weight_mass(u.n))
    if sol.params.alpha == 1.0:
        rep.info("momentum[e^nu]", m_exp, "alpha = 1: vanishing not implied")
        rep.info("momentum[u]", m_u, "alpha = 1: vanishing not implied")
        return rep
    rep.absolute("momentum[e^nu]", m_exp, tol)
    rep.absolute("momentum[u]", m_u, tol)
    return rep


# ---------------------------------------------------------------------------
# thresholds


def thresholds(n: int) -> dict[str, dict]:
    """Named uniqueness thresholds with their exact expressions."""
    if n == 6:
        t = {
            "alpha_6": ("(115+sqrt(2851))/273", (115 + math.sqrt(2851)) / 273),
            "alpha_bar": ("(221+sqrt(13345))/522", (221 + math.sqrt(13345)) / 522),
            "alpha_low": ("0.61488", 0.61488),
            "three_fifths": ("3/5", 3 / 5),
            "two_thirds": ("2/3", 2 / 3),
        }
    elif n == 8:
        t = {
            "alpha_8": ("19/23", 19 / 23),
            "twenty_one_25ths": ("21/25", 21 / 25),
            "two_thirds": ("2/3", 2 / 3),
        }
    else:
        raise DomainError(f"thresholds are only available for n = 6 and n = 8, got {n}")
    return {k: {"expr": e, "value": v} for k, (e, v) in t.items()}


def threshold_report(n: int) -> VerificationReport:
    """Decimal agreement and ordering of the thresholds."""
    th = {k: v["value"] for k, v in thresholds(n).items()}
    rep = VerificationReport("thresholds")
    if n == 6:
        rep.absolute("alpha_6 ~ 0.61683", round(th["alpha_6"], 5) - 0.61683, 0.0)
        chain = [1 / 7, 1 / 2, th["three_fifths"], th["alpha_low"], th["alpha_6"], th["alpha_bar"], th["two_thirds"], 1.0]
        names = "1/7<1/2<3/5<alpha_low<alpha_6<alpha_bar<2/3<1"
    else:
        rep.absolute("alpha_8 ~ 0.8261", round(th["alpha_8"], 4) - 0.8261, 0.0)
        chain = [1 / 9, 1 / 2, th["two_thirds"], th["alpha_8"], th["twenty_one_25ths"], 1.0]
        names = "1/9<1/2<2/3<alpha_8<21/25<1"
    ok = all(a < b for a, b in zip(chain, chain[1:]))
    rep.cases.append(Case(f"ordering {names}", float(ok), 1.0, 0.0 if ok else 1.0, 0.0, "abs", ok))
    return rep


# ---------------------------------------------------------------------------
# sampled inequalities


def _mobius(u: SpectralField, s: float, spec: BasisSpec, rule: QuadratureRule) -> SpectralField:
    x = rule.nodes
    y = (x + s) / (1 + s * x)
    vals = synthesize(u, np.clip(y, -1.0, 1.0)) + 0.5 * math.log1p(-s * s) - np.log1p(s * x)
    return analyze(rule, vals, spec)


def project_to_balanced(u: SpectralField, K: int = 64) -> SpectralField:
    """Move u into the zero-momentum set by an axial Moebius pull-back.

    ``v(x) = u((x+s)/(1+sx)) + (1/2)ln(1-s^2) - ln(1+sx)`` with s found by root
    bracketing so that the first momentum of the truncated v vanishes.
    """
    spec = BasisSpec(u.n, K)
    rule = default_rule(spec)
    f = lambda s: first_momentum(_mobius(u, s, spec, rule), rule)
    lo, hi = -0.5, 0.5
    while f(lo) * f(hi) > 0:
        lo, hi = (lo - 1) / 2, (hi + 1) / 2
        if hi > 1 - 1e-6:
            raise RuntimeError("could not bracket the balancing Moebius parameter")
    s = brentq(f, lo, hi, xtol=1e-15)
    return _mobius(u, s, spec, rule)


@dataclass
class UniquenessScan:
    """Outcome of Newton from random initial fields at one ``(n, alpha)``."""

    n: int
    alpha: float
    constant: list[SolutionPoint] = field(default_factory=list)
    non_constant: list[SolutionPoint] = field(default_factory=list)
    no_limit: list[str] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.constant) + len(self.non_constant) + len(self.no_limit)


def random_init(n: int, rng: np.random.Generator, K: int = 32, scale: float = 0.3, r: float = 0.5) -> SpectralField:
    """Zero-mean field with ``a_k ~ scale U[-1, 1] r^(k-1)``, k = 1..K."""
    c = np.zeros(K + 1)
    c[1:] = scale * rng.uniform(-1, 1, K) * r ** np.arange(K)
    return SpectralField(BasisSpec(n, K), c)


def uniqueness_scan(n: int, alpha: float, trials: int = 50, seed: int = 0, balance: bool = True) -> UniquenessScan:
    """Newton from ``trials`` seeded random fields; sorts limits into constant / non-constant.

    With ``balance`` each initial field is first moved to zero first momentum, where
    every solution with alpha != 1 lies. Runs that do not converge (typically drifting
    towards concentration) are recorded in ``no_limit``.
    """
    from .solver import NewtonFailure, NewtonOptions, SolutionClass, classify, newton_solve

    rng = np.random.default_rng(seed)
    out = UniquenessScan(n, alpha)
    params = EquationParams(n, alpha)
    opts = NewtonOptions(symmetry="none")
    for _ in range(trials):
        u0 = random_init(n, rng)
        if balance:
            u0 = project_to_balanced(u0, K=u0.K)
        try:
            sol = newton_solve(params, u0, opts)
        except NewtonFailure as exc:
            out.no_limit.append(str(exc))
            continue
        (out.constant if classify(sol) is SolutionClass.Constant else out.non_constant).append(sol)
    return out


def sampled_inequalities(
    n: int,
    trials: int = 200,
    seed: int = 0,
    rule: QuadratureRule | None = None,
    which: tuple[str, ...] = ("beckner", "szego"),
) -> VerificationReport:
    """Beckner, momentum-corrected and constrained-functional inequalities on random fields.

    ``which`` selects the Beckner part (J_1 on samples and on the extremal family) and/or
    the part for n = 6, 8 (momentum-corrected functional, balanced I_alpha).
    """
    rng = np.random.default_rng(seed)
    rep = VerificationReport("sampled", seed=seed)
    beck = "beckner" in which
    even_case = n in (6, 8) and "szego" in which
    thr = thresholds(n)[f"alpha_{n}"]["value"] if even_case else None
    worst_half = math.inf
    for i in range(trials):
        u = random_field(n, rng)
        r = rule or default_rule(u.spec)
        if beck:
            j1 = functional_J(EquationParams(n, 1.0), u, r)
            rep.inequality(f"beckner[{i}]", -j1, 1e-8, 0.0, note="J_1 >= -1e-8")
        if not even_case:
            continue
        sj = functional_scriptJ(EquationParams(n, n / (n + 1)), u, r)
        rep.inequality(f"szego[{i}]", -sj, 1e-8, 0.0, note="scriptJ_{n/(n+1)} >= -1e-8")
        v = project_to_balanced(u)
        rv = default_rule(v.spec)
        for a in (thr, 0.9):
            val = functional_I(EquationParams(n, a), v, rv)
            rep.inequality(f"balanced I[alpha={a:.5f}][{i}]", -val, 1e-6, 0.0, note="I_alpha >= -1e-6 on balanced fields")
        worst_half = min(worst_half, functional_I(EquationParams(n, 0.5), v, rv))
    if even_case and trials:
        rep.info("min I_1/2 on balanced samples", worst_half, "exploratory, no pass/fail")
    for a in (0.3, 0.6) if beck else ():
        ext = extremal_field(n, a)
        r = default_rule(ext.spec)
        rep.absolute(f"beckner extremal[a={a}]", functional_J(EquationParams(n, 1.0), ext, r), 1e-6)
    return rep


# ---------------------------------------------------------------------------
# suites

SUITES = ("appendixA", "appendixB", "decomp", "lemma", "keyeq", "gradient", "momenta", "beckner", "szego")
_SOLUTION_SUITES = ("lemma", "keyeq", "gradient", "momenta")


def reference_solutions(n: int, count: int = 3, seed: int = 0) -> list[SolutionPoint]:
    """Solutions used by the solution-dependent suites.

    ``count`` members of the alpha = 1 family ``-ln(1 - a x)`` with seeded ``a`` in
    [-0.7, 0.7], followed by three solutions on the branch leaving ``rho_2`` towards
    ``alpha = 1/2`` (at 0.2, 0.3, 0.45 when those lie on the traced part).
    """
    from .continuation import ContinuationError, ContinuationOptions, branch_switch, continue_branch, solve_on_branch

    rng = np.random.default_rng(seed)
    sols = []
    for a in rng.uniform(-0.7, 0.7, count):
        u = extremal_field(n, float(a))
        sols.append(make_solution(EquationParams(n, 1.0), u, default_rule(u.spec)))
    if n < 3:
        return sols
    lo = math.factorial(n) / paneitz_eigenvalues(n, 2)[2]
    br = continue_branch(
        branch_switch(n, 2, -1, K=32),
        ContinuationOptions(alpha_window=(lo * (1 - 1e-9), 0.5), l_inf_max=4.0),
    )
    alphas = [p.alpha for p in br.points]
    amin, amax = min(alphas), max(alphas)
    targets = [a for a in (0.2, 0.3, 0.45) if amin < a < amax]
    if len(targets) < 3:
        targets = [amin + f * (amax - amin) for f in (0.25, 0.5, 0.75)]
    for a in targets:
        try:
            sols.append(solve_on_branch(br, a))
        except ContinuationError:
            continue
    return sols


def _solution_suite(name: str, sols: list[SolutionPoint]) -> VerificationReport:
    rep = VerificationReport(name)
    for i, sol in enumerate(sols):
        tag = f"[sol {i}: alpha={sol.params.alpha:.6g}]"
        if name == "lemma":
            sub = check_lemma_equality(sol)
        elif name == "keyeq":
            sub = check_key_equation_and_estimates(sol)
        elif name == "gradient":
            sub = check_gradient(sol)
        else:
            sub = check_momenta(sol)
        for c in sub.cases:
            c.id = c.id + tag
        rep.extend(sub)
    return rep


def run_suite(name: str, n: int, trials: int = 20, seed: int = 0, solutions: list[SolutionPoint] | None = None) -> VerificationReport:
    """Run one named suite. Deterministic given ``(name, n, trials, seed)``.

    Polynomial suites draw ``trials`` random G; solution suites use ``trials``
    (capped at 5) members of the alpha = 1 family plus three branch solutions.
    """
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}")
    rng = np.random.default_rng(seed)
    if name == "appendixA":
        if n != 6:
            raise DomainError("appendixA requires n = 6")
        rep = VerificationReport(name)
        for i in range(trials):
            rep.extend(check_appendix_A(random_g(6, 10, rng), id=f"appendixA[{i}]"))
    elif name == "appendixB":
        if n != 8:
            raise DomainError("appendixB requires n = 8")
        rep = VerificationReport(name)
        for i in range(trials):
            rep.extend(check_appendix_B(random_g(8, 8, rng), id=f"appendixB[{i}]"))
    elif name == "decomp":
        rep = VerificationReport(name)
        for i in range(trials):
            sub = check_decompositions(random_g(n, 10, rng, vanishing=False))
            for c in sub.cases:
                c.id = f"{c.id}[{i}]"
            rep.extend(sub)
    elif name in _SOLUTION_SUITES:
        if name == "keyeq" and n not in (6, 8):
            raise DomainError("keyeq requires n = 6 or 8")
        if solutions is None:
            solutions = reference_solutions(n, min(trials, 5), seed)
        rep = _solution_suite(name, solutions)
    else:
        rep = sampled_inequalities(n, trials, seed, which=(name,))
        rep.suite = name
    rep.seed = seed
    return rep


def suites_for(n: int) -> list[str]:
    """Suites meaningful for dimension ``n``, in report order."""
    out = []
    for name in SUITES:
        if (name == "appendixA" and n != 6) or (name == "appendixB" and n != 8):
            continue
        if name == "keyeq" and n not in (6, 8):
            continue
        out.append(name)
    return out
