import csv
import json
import math

import numpy as np
import pytest

from qcurve import cli
from qcurve.continuation import ContinuationOptions, branch_switch, continue_branch
from qcurve.io import (
    BRANCH_HEADER,
    dumps_json,
    fmt_float,
    load_solution,
    read_branch_csv,
    save_solution,
    write_branch_csv,
)
from qcurve.paneitz import EquationParams, default_rule, extremal_field, make_solution
from qcurve.solver import newton_solve
from qcurve.verifier import VerificationReport


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# --- formatting -----------------------------------------------------------


@pytest.mark.parametrize("x", [0.1, 1 / 3, math.pi * 1e-300, 2.0**-1074, 1.7976931348623157e308, -0.0])
def test_float_roundtrip(x):
    assert float(fmt_float(x)) == x


def test_dumps_json_nonfinite_and_types():
    text = dumps_json({"a": math.nan, "b": [1, 2.5, math.inf], "c": np.float64(0.1), "d": True, "e": "s"})
    d = json.loads(text)
    assert d == {"a": None, "b": [1, 2.5, None], "c": 0.1, "d": True, "e": "s"}
    assert "0.10000000000000001" in text


def test_dumps_json_rejects_objects():
    with pytest.raises(TypeError):
        dumps_json({"x": object()})


# --- solution files -------------------------------------------------------


def test_solution_roundtrip_bit_exact(tmp_path):
    u = extremal_field(6, 0.37, K=40)
    sol = make_solution(EquationParams(6, 1.0), u, default_rule(u.spec))
    path = tmp_path / "s.json"
    save_solution(path, sol)
    back = load_solution(path)
    assert back.params == sol.params
    assert np.array_equal(back.u.coeffs, sol.u.coeffs)
    assert back.residual_norm == sol.residual_norm
    assert back.diagnostics == sol.diagnostics
    d = json.loads(path.read_text())
    assert d["gauge"] == "zero-mean" and len(d["coeffs"]) == d["K"] + 1 and d["coeffs"][0] == 0


def test_solution_file_validation(tmp_path):
    u = extremal_field(6, 0.2, K=16)
    sol = make_solution(EquationParams(6, 1.0), u, default_rule(u.spec))
    path = tmp_path / "s.json"
    save_solution(path, sol)
    d = json.loads(path.read_text())
    d["coeffs"] = d["coeffs"][:-1]
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError):
        load_solution(path)


# --- branch files ---------------------------------------------------------


def test_branch_csv(tmp_path):
    br = continue_branch(branch_switch(6, 2, -1, K=32), ContinuationOptions(max_steps=5))
    path = tmp_path / "b.csv"
    write_branch_csv(path, br)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == BRANCH_HEADER
    assert len(rows) == 6
    assert rows[1][0] == fmt_float(br.points[0].rho)
    d = read_branch_csv(path)
    assert np.array_equal(d["alpha"], [p.alpha for p in br.points])
    assert np.array_equal(d["amp_a2"], [p.sol.u.coeffs[2] for p in br.points])


# --- cli: solve -----------------------------------------------------------


def test_solve_trivial(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, _, err = run(["solve", "--n", "6", "--alpha", "0.9", "--init", "zero", "--out", str(out)], capsys)
    assert code == 0
    sol = load_solution(out)
    assert np.all(sol.u.coeffs == 0)
    assert "constant" in err


def test_solve_branch_seed_and_reload(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, _, err = run(["solve", "--n", "6", "--alpha", "0.45", "--init", "mode:2:-1e-3", "--out", str(out)], capsys)
    assert code == 0
    assert "non-constant" in err
    sol = load_solution(out)
    assert sol.u.coeffs[2] > 0
    # reloading reconverges in at most two Newton steps
    again = newton_solve(sol.params, sol.u)
    assert again.iterations <= 2
    out2 = tmp_path / "s2.json"
    code, _, err = run(["solve", "--n", "6", "--alpha", "0.45", "--init", f"file:{out}", "--out", str(out2)], capsys)
    assert code == 0
    assert "converged in 0 iterations" in err or "converged in 1 iterations" in err or "converged in 2 iterations" in err


def test_solve_to_stdout_deterministic(capsys):
    argv = ["solve", "--n", "4", "--alpha", "0.7", "--modes", "16"]
    code1, out1, _ = run(argv, capsys)
    code2, out2, _ = run(argv, capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    assert json.loads(out1)["K"] == 16


@pytest.mark.parametrize(
    "argv, msg",
    [
        (["solve", "--n", "6", "--alpha", "-1"], "alpha must be positive"),
        (["solve", "--n", "6", "--alpha", "0"], "alpha must be positive"),
        (["solve", "--n", "1", "--alpha", "0.5"], "n must be"),
        (["solve", "--n", "6", "--alpha", "0.5", "--init", "mode:x:1"], "bad --init"),
        (["solve", "--n", "6", "--alpha", "0.5", "--quad", "10"], "--quad"),
        (["solve", "--n", "6"], "required"),
        (["bogus"], "invalid choice"),
        (["thresholds", "--n", "4"], "invalid choice"),
        (["continue", "--n", "6", "--branch", "2"], "bad --branch"),
        (["continue", "--n", "6", "--branch", "2:-", "--alpha-window", "0.5:0.1"], "alpha-window"),
        (["verify", "--suite", "appendixA", "--n", "8"], "appendixA requires"),
    ],
)
def test_usage_errors_exit_1(argv, msg, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert msg in err


def test_solver_failure_exit_2(capsys):
    code, _, err = run(["solve", "--n", "6", "--alpha", "0.5", "--tol", "1e-40", "--modes", "8"], capsys)
    assert code == 2
    assert "solver failure" in err


def test_solve_plot(tmp_path, capsys):
    pytest.importorskip("matplotlib")
    png = tmp_path / "u.png"
    code, _, _ = run(["solve", "--n", "6", "--alpha", "0.3", "--init", "mode:2:-1e-3", "--plot", str(png)], capsys)
    assert code == 0
    assert png.stat().st_size > 0


# --- cli: continue --------------------------------------------------------


def test_continue_b2_minus(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, _, err = run(["continue", "--n", "6", "--branch", "2:-", "--alpha-window", "0.143:0.5", "--out", str(out)], capsys)
    assert code == 0
    d = read_branch_csv(out)
    assert len(d["alpha"]) >= 10
    assert d["alpha"].max() > 0.49 and d["alpha"].max() < 0.5
    assert d["l_inf"][-1] > d["l_inf"][1]


def test_continue_b3_parity(tmp_path, capsys):
    paths = {}
    for s in "+-":
        paths[s] = tmp_path / f"b3{s}.csv"
        code, _, _ = run(["continue", "--n", "6", "--branch", f"3:{s}", "--max-steps", "12", "--out", str(paths[s])], capsys)
        assert code == 0
    p, m = read_branch_csv(paths["+"]), read_branch_csv(paths["-"])
    np.testing.assert_allclose(p["rho"], m["rho"], rtol=1e-10)
    np.testing.assert_allclose(p["amp_a2"], m["amp_a2"], atol=1e-10)
    np.testing.assert_allclose(p["l_inf"], m["l_inf"], rtol=1e-8)


def test_continue_n8_confined(capsys):
    code, out, _ = run(["continue", "--n", "8", "--branch", "2:-"], capsys)
    assert code == 0
    rows = list(csv.reader(out.splitlines()))[1:]
    alphas = np.array([float(r[1]) for r in rows])
    assert np.all((alphas > 1 / 9) & (alphas < 19 / 23))


def test_continue_too_few_points_exit_2(capsys):
    code, _, _ = run(["continue", "--n", "6", "--branch", "2:-", "--max-steps", "3"], capsys)
    assert code == 2


def test_continue_plot(tmp_path, capsys):
    pytest.importorskip("matplotlib")
    out, png = tmp_path / "b.csv", tmp_path / "b.png"
    code, _, _ = run(["continue", "--n", "6", "--branch", "2:-", "--max-steps", "12", "--out", str(out), "--plot", str(png)], capsys)
    assert code == 0
    assert png.stat().st_size > 0


# --- cli: verify / bifurcations / thresholds ------------------------------


def test_thresholds_json(capsys):
    code, out, _ = run(["thresholds", "--n", "6"], capsys)
    assert code == 0
    assert '"value": 0.61683' in out
    d = json.loads(out)
    assert d["thresholds"]["alpha_6"]["value"] == (115 + math.sqrt(2851)) / 273


def test_thresholds_n8(capsys):
    code, out, _ = run(["thresholds", "--n", "8"], capsys)
    assert code == 0
    assert json.loads(out)["thresholds"]["alpha_8"]["value"] == 19 / 23


def test_bifurcations_json(capsys):
    code, out, _ = run(["bifurcations", "--n", "6", "--kmax", "3"], capsys)
    assert code == 0
    assert json.loads(out)["rho"] == [120, 840, 3360]


def test_verify_appendix(capsys):
    code, out, _ = run(["verify", "--suite", "appendixA", "--n", "6", "--trials", "20", "--seed", "7"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["suite"] == "appendixA" and d["seed"] == 7 and len(d["cases"]) == 20


def test_verify_all_deterministic_across_threads(tmp_path, capsys, monkeypatch):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("QCURVE_THREADS", threads)
        path = tmp_path / f"r{threads}.json"
        code, _, _ = run(["verify", "--suite", "all", "--n", "6", "--trials", "3", "--seed", "5", "--out", str(path)], capsys)
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_verify_failure_exit_3(capsys, monkeypatch):
    def failing(name, n, trials, seed, sols=None):
        rep = VerificationReport(name, seed=seed)
        rep.equality("forced", 1.0, 2.0, 1e-12)
        return rep

    monkeypatch.setattr(cli, "run_suite", failing)
    code, out, _ = run(["verify", "--suite", "decomp", "--n", "6"], capsys)
    assert code == 3
    assert json.loads(out)["passed"] is False


def test_bad_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("QCURVE_THREADS", "many")
    code, _, err = run(["verify", "--suite", "decomp", "--n", "6", "--trials", "1"], capsys)
    assert code == 1
