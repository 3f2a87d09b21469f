"""Command-line front end: ``qcurve {solve,continue,verify,bifurcations,thresholds}``.

Exit codes: 0 ok, 1 usage error, 2 numerical failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .continuation import (
    ContinuationError,
    ContinuationOptions,
    bifurcation_points,
    branch_switch,
    continue_branch,
    detect_trivial_crossings,
    solve_on_branch,
)
from .io import dumps_json, load_solution, read_branch_csv, save_solution, solution_to_dict, write_branch_csv
from .paneitz import EquationParams, L_INF_GRID, SolutionPoint
from .solver import NewtonFailure, NewtonOptions, classify, newton_solve
from .spectral import BasisSpec, DomainError, SpectralField, build_quadrature, evaluate
from .verifier import SUITES, reference_solutions, run_suite, suites_for, threshold_report, thresholds, VerificationReport

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _check_n(n: int) -> None:
    if n < 2:
        raise UsageError("n must be an integer >= 2")


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and alpha > 0):
        raise UsageError("alpha must be positive")


# ---------------------------------------------------------------------------
# plotting (optional dependency)


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise UsageError("--plot needs matplotlib (pip install 'artifact[plot]')") from exc
    return plt


def plot_solution(sol: SolutionPoint, path: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(L_INF_GRID, evaluate(sol.u, L_INF_GRID))
    ax.set_xlabel("x")
    ax.set_ylabel("u(x)")
    ax.set_title(f"n={sol.params.n}, alpha={sol.params.alpha:.6g}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_branch_csv(csv_path: str, path: str) -> None:
    plt = _pyplot()
    d = read_branch_csv(csv_path)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.plot(d["alpha"], d["amp_a2"], ".-")
    a1.set_xlabel("alpha")
    a1.set_ylabel("a_2")
    a2.plot(d["alpha"], d["l_inf"], ".-")
    a2.set_xlabel("alpha")
    a2.set_ylabel("max |u|")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# solve


def _parse_init(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "zero" and not rest:
        return ("zero",)
    if kind == "mode":
        parts = rest.split(":")
        if len(parts) == 2:
            try:
                k, eps = int(parts[0]), float(parts[1])
            except ValueError:
                pass
            else:
                if k >= 1 and eps != 0 and math.isfinite(eps):
                    return ("mode", k, eps)
        raise UsageError(f"bad --init {spec!r}: expected mode:<k>:<eps> with k >= 1, eps != 0")
    if kind == "file" and rest:
        return ("file", rest)
    raise UsageError(f"bad --init {spec!r}")


def _branch_seed(params: EquationParams, k: int, eps: float, K: int) -> SpectralField | None:
    """Trace the branch labelled by sign(eps) from rho_k and interpolate at the target alpha."""
    n = params.n
    sign = 1 if eps > 0 else -1
    start = branch_switch(n, k, sign, eps=abs(eps), K=min(32, K))
    a_k = start[0].alpha
    lo, hi = min(a_k, params.alpha), max(a_k, params.alpha)
    opts = ContinuationOptions(alpha_window=(0.95 * lo, 1.05 * hi), l_inf_max=12.0, max_steps=400)
    try:
        br = continue_branch(start, opts, k=k, sign=sign)
        sol = solve_on_branch(br, params.alpha)
    except (ContinuationError, NewtonFailure, OverflowError):
        return None
    if classify(sol).value == "constant":
        return None
    return sol.u


def cmd_solve(args) -> int:
    _check_n(args.n)
    _check_alpha(args.alpha)
    params = EquationParams(args.n, args.alpha)
    init = _parse_init(args.init)
    if init[0] == "file":
        try:
            loaded = load_solution(init[1])
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read {init[1]}: {exc}") from exc
        if loaded.params.n != args.n:
            raise UsageError(f"file has n={loaded.params.n}, expected {args.n}")
        K = args.modes or loaded.u.K
        u0 = loaded.u.resized(K)
    else:
        K = args.modes or 64
        if K < 2:
            raise UsageError("--modes must be >= 2")
        spec = BasisSpec(args.n, K)
        u0 = SpectralField.zeros(spec)
        if init[0] == "mode":
            _, k, eps = init
            if k > K:
                raise UsageError(f"mode {k} exceeds --modes {K}")
            seed = _branch_seed(params, k, eps, K)
            if seed is None:
                print(f"branch from mode {k} does not reach alpha={args.alpha}; Newton from eps*C_{k}", file=sys.stderr)
                u0 = SpectralField.mode(spec, k, abs(eps) if eps < 0 else -eps)
            else:
                K = max(K, seed.K)
                u0 = seed.resized(K)
    Q = args.quad or 2 * K + args.n
    if Q < K + 1:
        raise UsageError(f"--quad {Q} cannot resolve K={K}")
    rule = build_quadrature(args.n, Q)
    try:
        sol = newton_solve(params, u0, NewtonOptions(tol=args.tol), rule=rule)
    except (NewtonFailure, OverflowError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        hist = getattr(exc, "history", None)
        if hist:
            print("residual history: " + " ".join(f"{h:.3e}" for h in hist), file=sys.stderr)
        return EXIT_NUMERIC
    print(f"converged in {sol.iterations} iterations, residual {sol.residual_norm:.3e}, {classify(sol).value}", file=sys.stderr)
    if args.out:
        save_solution(args.out, sol)
    else:
        sys.stdout.write(dumps_json(solution_to_dict(sol)))
    if args.plot:
        plot_solution(sol, args.plot)
    return EXIT_OK


# ---------------------------------------------------------------------------
# continue


def _parse_branch(spec: str) -> tuple[int, int]:
    k, _, s = spec.partition(":")
    try:
        kk = int(k)
    except ValueError:
        kk = 0
    if kk < 1 or s not in ("+", "-"):
        raise UsageError(f"bad --branch {spec!r}: expected <k>:<+|->")
    return kk, 1 if s == "+" else -1


def _parse_window(spec: str | None):
    if spec is None:
        return None
    lo, _, hi = spec.partition(":")
    try:
        w = (float(lo), float(hi))
    except ValueError as exc:
        raise UsageError(f"bad --alpha-window {spec!r}") from exc
    if not (0 < w[0] < w[1]):
        raise UsageError("--alpha-window needs 0 < lo < hi")
    return w


def cmd_continue(args) -> int:
    _check_n(args.n)
    k, sign = _parse_branch(args.branch)
    window = _parse_window(args.alpha_window)
    if args.ds <= 0 or args.max_steps < 1:
        raise UsageError("--ds must be positive and --max-steps >= 1")
    opts = ContinuationOptions(
        ds=args.ds, max_steps=args.max_steps, alpha_window=window, l_inf_max=args.linf_max, ds_max=max(0.5, args.ds)
    )
    try:
        br = continue_branch(branch_switch(args.n, k, sign, K=32), opts, k=k, sign=sign)
    except (ContinuationError, NewtonFailure, OverflowError) as exc:
        print(f"continuation failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        write_branch_csv(args.out, br)
    else:
        write_branch_csv(sys.stdout, br)
    print(f"{len(br.points)} points, termination {br.termination}, folds {br.folds}", file=sys.stderr)
    if args.plot:
        if not args.out:
            raise UsageError("--plot needs --out")
        plot_branch_csv(args.out, args.plot)
    return EXIT_OK if len(br.points) >= 10 else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# verify / bifurcations / thresholds


def _threads() -> int:
    env = os.environ.get("QCURVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"QCURVE_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def cmd_verify(args) -> int:
    _check_n(args.n)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    names = suites_for(args.n) if args.suite == "all" else [args.suite]
    sols = None
    if any(s in ("lemma", "keyeq", "gradient", "momenta") for s in names):
        try:
            sols = reference_solutions(args.n, min(args.trials, 5), args.seed)
        except (ContinuationError, NewtonFailure, OverflowError) as exc:
            print(f"could not build reference solutions: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    try:
        with ThreadPoolExecutor(max_workers=min(_threads(), len(names))) as ex:
            futs = [ex.submit(run_suite, s, args.n, args.trials, args.seed, sols) for s in names]
            reports = [f.result() for f in futs]
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    if len(reports) == 1:
        rep = reports[0]
    else:
        rep = VerificationReport("all", seed=args.seed)
        for r in reports:
            rep.extend(r)
    _emit(rep.to_json(), args.out)
    print(rep.summary(), file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_bifurcations(args) -> int:
    _check_n(args.n)
    if args.kmax < 1:
        raise UsageError("--kmax must be >= 1")
    pts = bifurcation_points(args.n, args.kmax)
    detected = detect_trivial_crossings(args.n, args.kmax)
    rows = []
    ok = len(detected) == len(pts)
    for p, d in zip(pts, detected):
        rel = abs(d - p.rho) / p.rho
        ok = ok and rel <= 1e-10
        rows.append({"k": p.k, "rho": p.rho, "alpha": p.alpha, "detected_rho": d, "rel_error": rel})
    out = {"n": args.n, "kmax": args.kmax, "rho": [p.rho for p in pts], "points": rows, "passed": ok}
    _emit(dumps_json(out), args.out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_thresholds(args) -> int:
    rep = threshold_report(args.n)
    out = {"n": args.n, "thresholds": thresholds(args.n), "passed": rep.passed, "cases": rep.to_dict()["cases"]}
    _emit(dumps_json(out), args.out)
    return EXIT_OK if rep.passed else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcurve", description="Axially symmetric constant Q-curvature equation on S^n.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="Newton solve at fixed alpha")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--modes", type=int, default=None, help="truncation K (default 64, or the file's K)")
    s.add_argument("--quad", type=int, default=None, help="quadrature size (default 2K+n)")
    s.add_argument("--init", default="zero", help="zero | mode:<k>:<eps> | file:<path>")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out")
    s.add_argument("--plot", help="write a profile figure (needs matplotlib)")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("continue", help="trace a bifurcating branch")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--branch", required=True, help="<k>:<+|->")
    c.add_argument("--alpha-window", default=None, help="<lo>:<hi>")
    c.add_argument("--ds", type=float, default=0.05)
    c.add_argument("--max-steps", type=int, default=2000)
    c.add_argument("--linf-max", type=float, default=8.0, help="stop once max|u| exceeds this")
    c.add_argument("--out")
    c.add_argument("--plot", help="write a branch figure (needs matplotlib and --out)")
    c.set_defaults(func=cmd_continue)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bifurcations", help="bifurcation values rho_k on the trivial branch")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--kmax", type=int, default=10)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bifurcations)

    t = sub.add_parser("thresholds", help="uniqueness thresholds")
    t.add_argument("--n", type=int, choices=(6, 8), required=True)
    t.add_argument("--out")
    t.set_defaults(func=cmd_thresholds)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"qcurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"qcurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
