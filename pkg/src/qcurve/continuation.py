"""Bifurcation points on the trivial branch, branch switching and pseudo-arclength continuation.

Branches are traced in ``y = (sigma, a_1..a_K)`` with ``sigma = rho / rho_k`` so the
parameter coordinate is O(1). Labels follow the local parametrization
``u = eps C_k + ...``: branch ``-`` has ``eps > 0`` and branch ``+`` has ``eps < 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .paneitz import EquationParams, SolutionPoint, default_rule, make_solution, tail_fraction
from .solver import NewtonFailure, NewtonOptions, linearize, newton_solve
from .spectral import BasisSpec, DomainError, SpectralField, basis_norms, paneitz_eigenvalues

__all__ = [
    "BifurcationPoint",
    "BranchPoint",
    "Branch",
    "ContinuationOptions",
    "ContinuationError",
    "Termination",
    "bifurcation_points",
    "detect_trivial_crossings",
    "transcritical_slope",
    "transcritical_slope_closed_form",
    "cubic_ratio",
    "default_eps",
    "branch_switch",
    "continue_branch",
    "slope_estimate",
    "fit_transcritical_slope",
    "solve_on_branch",
]

log = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    """Branch tracing could not start or a requested point is not on the branch."""


class Termination:
    REACHED_TARGET = "reached_target"
    MAX_STEPS = "max_steps"
    STEP_FAILURE = "step_failure"
    FOLD_COUNT_EXCEEDED = "fold_count_exceeded"
    RESOLUTION_LIMIT = "resolution_limit"


@dataclass(frozen=True)
class BifurcationPoint:
    k: int
    rho: float
    alpha: float


def bifurcation_points(n: int, kmax: int) -> list[BifurcationPoint]:
    """``rho_k = lambda_k / n`` and ``alpha_k = n! / lambda_k`` for k = 1..kmax."""
    if kmax < 1:
        raise DomainError("kmax must be >= 1")
    lam = paneitz_eigenvalues(n, kmax)
    nf = math.factorial(n)
    return [BifurcationPoint(k, lam[k] / n, nf / lam[k]) for k in range(1, kmax + 1)]


def _trivial_spectrum(n: int, rho: float, K: int) -> np.ndarray:
    spec = BasisSpec(n, K)
    J = linearize(n, rho, SpectralField.zeros(spec), default_rule(spec)).J
    return np.sort(np.linalg.eigvals(J).real)


def detect_trivial_crossings(n: int, kmax: int, K: int | None = None) -> list[float]:
    """Locate where the assembled Jacobian at u = 0 turns singular as rho grows.

    The m-th smallest eigenvalue of the linearization changes sign at the m-th
    crossing; crossings are bracketed on a geometric rho grid and refined by brentq.
    """
    K = K or kmax + 2
    lo, hi = 1e-3, 1.0
    while _count_negative(n, hi, K) < kmax:
        hi *= 2.0
    grid = np.geomspace(lo, hi, 400)
    counts = np.array([_count_negative(n, r, K) for r in grid])
    out = []
    for m in range(1, kmax + 1):
        i = int(np.argmax(counts >= m))
        a, b = grid[i - 1], grid[i]
        f = lambda r, m=m: _trivial_spectrum(n, r, K)[m - 1]
        out.append(brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200))
    return out


def _count_negative(n: int, rho: float, K: int) -> int:
    return int(np.sum(_trivial_spectrum(n, rho, K) < 0))


def cubic_ratio(n: int) -> float:
    """``int w C_2^3 / int w C_2^2`` by quadrature (exact for the polynomial integrand)."""
    from .spectral import build_quadrature, gegenbauer_table

    rule = build_quadrature(n, 4)
    c2 = gegenbauer_table(n, 2, rule.nodes)[2]
    return rule.integrate(c2**3) / rule.integrate(c2**2)


def transcritical_slope(n: int) -> float:
    """``d rho / d a_2`` at the transcritical point: ``-((n+1)!/2) * cubic_ratio(n)``.

    In closed form ``-2 (n+1)! (n-1) / (n (n+5))``.
    """
    return -0.5 * math.factorial(n + 1) * cubic_ratio(n)


def transcritical_slope_closed_form(n: int) -> float:
    """The closed form ``-(n+1)! (n-1)^2 / (n (n+5))`` as printed in the literature.

    It disagrees with :func:`transcritical_slope` by the factor ``(n-1)/2``; kept for
    comparison only.
    """
    return -math.factorial(n + 1) * (n - 1) ** 2 / (n * (n + 5))


def default_eps(n: int, k: int) -> float:
    """Seed amplitude ``1e-3 |slope|^{-1/2}`` clamped to ``[1e-5, 1e-2]`` (slope of mode 2)."""
    s = abs(transcritical_slope(n)) if k == 2 else 1.0
    return float(np.clip(1e-3 / math.sqrt(s), 1e-5, 1e-2))


def branch_switch(
    n: int, k: int, sign: int, eps: float | None = None, K: int = 64
) -> tuple[EquationParams, SpectralField]:
    """Predicted point on branch ``B_k^sign`` near ``(rho_k, 0)``.

    ``sign = -1`` selects the branch with positive bifurcating amplitude. The predicted
    parameter offset uses the transcritical slope for k = 2 and zero otherwise.
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    if k < 1 or k > K:
        raise DomainError(f"mode {k} outside 1..{K}")
    eps = default_eps(n, k) if eps is None else abs(float(eps))
    amp = -sign * eps
    rho_k = paneitz_eigenvalues(n, k)[k] / n
    slope = transcritical_slope(n) if k == 2 else 0.0
    params = EquationParams.from_rho(n, rho_k + slope * amp)
    return params, SpectralField.mode(BasisSpec(n, K), k, amp)


@dataclass(frozen=True, eq=False)
class BranchPoint:
    rho: float
    alpha: float
    sol: SolutionPoint
    arc_param: float
    amp: float


@dataclass(eq=False)
class Branch:
    n: int
    k: int
    sign: int
    points: list[BranchPoint] = field(default_factory=list)
    termination: str = Termination.MAX_STEPS
    folds: int = 0

    @property
    def origin(self) -> dict:
        return {"k": self.k, "sign": self.sign}

    @property
    def rho_k(self) -> float:
        return float(paneitz_eigenvalues(self.n, self.k)[self.k] / self.n)


@dataclass(frozen=True)
class ContinuationOptions:
    ds: float = 0.05
    ds_min: float = 1e-6
    ds_max: float = 0.5
    max_steps: int = 2000
    alpha_window: tuple[float, float] | None = None
    l_inf_max: float | None = None
    tol: float = 1e-12
    max_corrector: int = 10
    K_max: int = 512
    tail_ratio: float = 1e-18
    max_folds: int = 8
    eps: float | None = None

    def __post_init__(self):
        if not self.ds > 0 or not self.ds_min > 0:
            raise DomainError("step sizes must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")
        if self.alpha_window is not None:
            lo, hi = self.alpha_window
            if not 0 < lo < hi:
                raise DomainError("alpha window must satisfy 0 < lo < hi")


class _Tracer:
    """Extended-system corrector in a fixed basis (rebuilt when K grows)."""

    def __init__(self, n: int, k: int, K: int, even: bool, opts: ContinuationOptions):
        self.n, self.k, self.even, self.opts = n, k, even, opts
        self.rho_k = float(paneitz_eigenvalues(n, k)[k] / n)
        self.set_K(K)

    def set_K(self, K: int) -> None:
        self.spec = BasisSpec(self.n, K)
        self.rule = default_rule(self.spec)
        modes = np.arange(1, K + 1)
        self.active = modes[modes % 2 == 0] if self.even else modes

    def pad(self, y: np.ndarray, old_active: np.ndarray) -> np.ndarray:
        c = np.zeros(self.spec.K + 1)
        c[old_active] = y[1:]
        return np.concatenate([[y[0]], c[self.active]])

    def field(self, y: np.ndarray) -> SpectralField:
        c = np.zeros(self.spec.K + 1)
        c[self.active] = y[1:]
        return SpectralField(self.spec, c)

    def correct(self, y_pred, y0, t, ds):
        """Newton on ``R(y) = 0, t.(y - y0) = ds``; returns (y, iterations) or None."""
        y = y_pred.copy()
        idx = self.active - 1
        for it in range(self.opts.max_corrector + 1):
            if not (y[0] > 0 and np.all(np.isfinite(y))):
                return None
            try:
                sys_ = linearize(self.n, y[0] * self.rho_k, self.field(y), self.rule)
            except OverflowError:
                return None
            arc = float(t @ (y - y0) - ds)
            if sys_.norm() <= self.opts.tol and abs(arc) <= 1e-12 * max(1.0, abs(ds)):
                return y, it
            if it == self.opts.max_corrector:
                return None
            top = np.column_stack([sys_.dR_drho[idx] * self.rho_k, sys_.J[np.ix_(idx, idx)]])
            Jx = np.vstack([top, t])
            try:
                dy = np.linalg.solve(Jx, -np.concatenate([sys_.R[idx], [arc]]))
            except np.linalg.LinAlgError:
                return None
            y = y + dy
        return None

    def tail_fraction(self, y: np.ndarray) -> float:
        return tail_fraction(self.field(y))


def continue_branch(
    start: tuple[EquationParams, SpectralField],
    opts: ContinuationOptions | None = None,
    k: int | None = None,
    sign: int | None = None,
) -> Branch:
    """Trace a branch by secant pseudo-arclength from a branch-switch seed.

    The first point is corrected with the bifurcating amplitude held at its seed
    value. Tracing stops after the first point outside ``alpha_window``, which is
    kept. Later steps adapt ``ds`` (grow after easy corrections, halve on failure)
    and double K whenever the coefficient tail carries more than ``tail_ratio`` of
    the energy.
    """
    opts = opts or ContinuationOptions()
    params, init = start
    n = params.n
    if k is None:
        k = int(np.argmax(np.abs(init.coeffs[1:]))) + 1
    amp0 = float(init.coeffs[k])
    if amp0 == 0.0:
        raise ContinuationError("seed has no component in the bifurcating mode")
    if sign is None:
        sign = -1 if amp0 > 0 else 1
    even = bool(np.all(init.coeffs[1::2] == 0.0))
    tr = _Tracer(n, k, init.K, even, opts)
    branch = Branch(n, k, sign)

    # first point: amplitude constraint a_k = amp0
    y_bif = np.zeros(1 + tr.active.size)
    y_bif[0] = 1.0
    jk = int(np.searchsorted(tr.active, k)) + 1
    t = np.zeros_like(y_bif)
    t[jk] = 1.0
    y_pred = np.concatenate([[params.rho / tr.rho_k], init.coeffs[tr.active]])
    got = tr.correct(y_pred, y_bif, t, amp0)
    if got is None:
        raise ContinuationError("corrector failed at the branch seed")
    y, _ = got
    while tr.tail_fraction(y) > opts.tail_ratio:
        if tr.spec.K >= opts.K_max:
            raise ContinuationError("branch seed is not resolved at the maximal K")
        old = tr.active
        tr.set_K(min(2 * tr.spec.K, opts.K_max))
        y, y_bif = tr.pad(y, old), tr.pad(y_bif, old)
        t = tr.pad(t, old)
        got = tr.correct(y, y_bif, t, amp0)
        if got is None:
            raise ContinuationError("corrector failed at the branch seed after refinement")
        y = got[0]
    y_prev = y_bif
    arc = float(np.linalg.norm(y - y_prev))
    _record(branch, tr, y, arc)

    ds = opts.ds
    lo_rho = hi_rho = None
    if opts.alpha_window is not None:
        fact = math.factorial(n - 1)
        lo_rho, hi_rho = fact / opts.alpha_window[1], fact / opts.alpha_window[0]
    last_dsigma = None
    steps = 1
    while True:
        if steps >= opts.max_steps:
            branch.termination = Termination.MAX_STEPS
            break
        sec = y - y_prev
        t = sec / np.linalg.norm(sec)
        got = None
        while got is None:
            got = tr.correct(y + ds * t, y, t, ds)
            if got is None:
                ds *= 0.5
                if ds < opts.ds_min:
                    break
        if got is None:
            branch.termination = Termination.STEP_FAILURE
            break
        y_new, iters = got
        if tr.tail_fraction(y_new) > opts.tail_ratio:
            if tr.spec.K >= opts.K_max:
                # the step overshot what the finest basis resolves
                ds *= 0.5
                if ds < opts.ds_min:
                    branch.termination = Termination.RESOLUTION_LIMIT
                    break
                continue
            # refine the basis and redo the step from the last accepted point
            old = tr.active
            tr.set_K(min(2 * tr.spec.K, opts.K_max))
            y, y_prev = tr.pad(y, old), tr.pad(y_prev, old)
            log.debug("K -> %d at rho=%.6g", tr.spec.K, y[0] * tr.rho_k)
            continue
        rho_new = y_new[0] * tr.rho_k
        exited = lo_rho is not None and not lo_rho <= rho_new <= hi_rho
        dsigma = y_new[0] - y[0]
        if last_dsigma is not None and dsigma * last_dsigma < 0:
            branch.folds += 1
            if branch.folds > opts.max_folds:
                branch.termination = Termination.FOLD_COUNT_EXCEEDED
                break
        if dsigma != 0.0:
            last_dsigma = dsigma
        arc += float(np.linalg.norm(y_new - y))
        y_prev, y = y, y_new
        bp = _record(branch, tr, y, arc)
        steps += 1
        if exited:
            # keep the first point past the window so the edge is bracketed
            branch.termination = Termination.REACHED_TARGET
            break
        if opts.l_inf_max is not None and bp.sol.diagnostics.l_inf > opts.l_inf_max:
            branch.termination = Termination.REACHED_TARGET
            break
        if iters <= 3:
            ds = min(1.5 * ds, opts.ds_max)
        elif iters >= 7:
            ds *= 0.7
    log.info("branch k=%d sign=%+d: %d points, %s", k, sign, len(branch.points), branch.termination)
    return branch


def _record(branch: Branch, tr: _Tracer, y: np.ndarray, arc: float) -> BranchPoint:
    params = EquationParams.from_rho(tr.n, y[0] * tr.rho_k)
    sol = make_solution(params, tr.field(y), tr.rule)
    bp = BranchPoint(params.rho, params.alpha, sol, arc, float(sol.u.coeffs[tr.k]))
    branch.points.append(bp)
    return bp


def _fit_slope(points: list[BranchPoint], rho_k: float, max_amp: float) -> float:
    pts = [p for p in points if abs(p.amp) <= max_amp]
    if len(pts) < 3:
        raise ContinuationError(f"need >= 3 points with |amp| <= {max_amp}, have {len(pts)}")
    a = np.array([p.amp for p in pts])
    r = np.array([p.rho for p in pts]) - rho_k
    A = np.column_stack([a, a**2])
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    return float(coef[0])


def slope_estimate(branch: Branch, max_amp: float = 0.05) -> float:
    """Least-squares ``d rho / d amp`` at ``amp -> 0`` from points with ``|amp| <= max_amp``.

    Fits ``rho - rho_k = s amp + c amp^2`` and returns ``s``.
    """
    return _fit_slope(branch.points, branch.rho_k, max_amp)


def fit_transcritical_slope(n: int, max_amp: float = 0.02, ds: float = 0.002) -> tuple[float, list[Branch]]:
    """Trace both halves of ``B_2`` with steps of ``ds`` up to ``|a_2| = max_amp`` and fit the slope."""
    steps = int(1.5 * max_amp / ds) + 5
    opts = ContinuationOptions(ds=ds, ds_max=ds, max_steps=steps)
    branches = []
    for sign in (-1, 1):
        br = continue_branch(branch_switch(n, 2, sign, K=32), opts, k=2, sign=sign)
        branches.append(br)
    pts = [p for br in branches for p in br.points]
    return _fit_slope(pts, branches[0].rho_k, max_amp), branches


def solve_on_branch(branch: Branch, alpha: float, opts: NewtonOptions | None = None) -> SolutionPoint:
    """Newton solution at ``alpha`` seeded by interpolating the bracketing branch points."""
    pts = branch.points
    for p, q in zip(pts, pts[1:]):
        if (p.alpha - alpha) * (q.alpha - alpha) <= 0:
            K = max(p.sol.u.K, q.sol.u.K)
            s = 0.0 if q.alpha == p.alpha else (alpha - p.alpha) / (q.alpha - p.alpha)
            c = (1 - s) * p.sol.u.resized(K).coeffs + s * q.sol.u.resized(K).coeffs
            init = SpectralField(BasisSpec(branch.n, K), c)
            try:
                return newton_solve(EquationParams(branch.n, alpha), init, opts)
            except NewtonFailure as exc:
                raise ContinuationError(f"Newton failed at alpha={alpha}: {exc}") from exc
    raise ContinuationError(f"alpha={alpha} not bracketed by the branch")
