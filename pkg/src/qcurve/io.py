"""JSON and CSV persistence with lossless float formatting.

Floats are written with 17 significant digits, which round-trips every double.
Non-finite floats become JSON ``null`` and CSV ``nan``/``inf``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import IO, Any

import numpy as np

from .paneitz import Diagnostics, EquationParams, SolutionPoint
from .spectral import BasisSpec, SpectralField

__all__ = [
    "fmt_float",
    "dumps_json",
    "solution_to_dict",
    "solution_from_dict",
    "save_solution",
    "load_solution",
    "BRANCH_HEADER",
    "branch_rows",
    "write_branch_csv",
    "read_branch_csv",
]

BRANCH_HEADER = ("rho", "alpha", "amp_a2", "l_inf", "beta", "gamma", "residual_norm")


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_encode(v, indent, level + 1) for v in obj]
        if not items:
            return "[]"
        # numeric arrays stay on one line
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[" + pad + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


# ---------------------------------------------------------------------------
# solution files


def solution_to_dict(sol: SolutionPoint) -> dict:
    return {
        "n": sol.params.n,
        "K": sol.u.K,
        "alpha": sol.params.alpha,
        "rho": sol.params.rho,
        "gauge": sol.gauge,
        "coeffs": [float(c) for c in sol.u.coeffs],
        "residual_norm": sol.residual_norm,
        "diagnostics": sol.diagnostics.to_dict(),
    }


def _num(v) -> float:
    return math.nan if v is None else float(v)


def solution_from_dict(d: dict) -> SolutionPoint:
    n, K = int(d["n"]), int(d["K"])
    coeffs = np.asarray(d["coeffs"], dtype=float)
    if coeffs.shape != (K + 1,):
        raise ValueError(f"expected {K + 1} coefficients, got {coeffs.size}")
    if d.get("gauge", "zero-mean") != "zero-mean":
        raise ValueError(f"unsupported gauge {d['gauge']!r}")
    diag = Diagnostics(**{k: _num(d["diagnostics"][k]) for k in ("l_inf", "beta", "gamma", "mean_shift")})
    return SolutionPoint(
        EquationParams(n, float(d["alpha"])),
        SpectralField(BasisSpec(n, K), coeffs),
        _num(d["residual_norm"]),
        diag,
    )


def save_solution(path: str | Path, sol: SolutionPoint) -> None:
    Path(path).write_text(dumps_json(solution_to_dict(sol)))


def load_solution(path: str | Path) -> SolutionPoint:
    return solution_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# branch files


def branch_rows(branch) -> list[list[float]]:
    """One row per branch point: rho, alpha, a_2, l_inf, beta, gamma, residual norm."""
    rows = []
    for p in branch.points:
        s = p.sol
        a2 = float(s.u.coeffs[2]) if s.u.K >= 2 else 0.0
        rows.append([p.rho, p.alpha, a2, s.diagnostics.l_inf, s.diagnostics.beta, s.diagnostics.gamma, s.residual_norm])
    return rows


def write_branch_csv(dest: str | Path | IO[str], branch) -> None:
    """Write the branch CSV; ``dest`` is a path or an open text stream."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_branch_csv(fh, branch)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(BRANCH_HEADER)
    for row in branch_rows(branch):
        w.writerow([fmt_float(v) for v in row])


def read_branch_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != BRANCH_HEADER:
            raise ValueError(f"unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in r], dtype=float).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}
