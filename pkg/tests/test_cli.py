import json
import subprocess
import sys

import numpy as np
import pytest

from fbf_mvi import problems
from fbf_mvi.cli import main
from fbf_mvi.report import read_trajectory_csv


def run(tmp_path, *args, out="out"):
    target = tmp_path / out
    code = main([*args, "--output", str(target)])
    return code, target


def report(d):
    return json.loads((d / "report.json").read_text())


def test_solve_ex1(tmp_path):
    code, d = run(tmp_path, "solve", "--example", "ex1", "--lambda", "0.25", "--dt", "0.01", "--t-end", "20")
    assert code == 0
    header, data = read_trajectory_csv(d / "trajectory.csv")
    assert header == ["t", "x_1", "y_1", "residual", "lyapunov"]
    assert abs(data[-1, 1] - 3.0) <= 1e-4
    rep = report(d)
    assert rep["stop_reason"] == "tolerance" and rep["final_residual"] <= rep["tol"]
    assert all(v["passed"] for v in rep["monitor_verdicts"].values())
    assert rep["certificate"]["alpha"] > 0


def test_solve_ex2_lambda_frac(tmp_path):
    code, d = run(tmp_path, "solve", "--example", "ex2", "--lambda-frac", "0.99", "--tol", "1e-6", "--stride", "200")
    assert code == 0
    rep = report(d)
    assert rep["lambda"] == pytest.approx(0.99 / (1 + problems.EX2_BETA**2), rel=1e-15)
    header, data = read_trajectory_csv(d / "trajectory.csv")
    assert header == ["t", "x_1", "x_2", "x_3", "y_1", "y_2", "y_3", "residual", "lyapunov"]
    assert np.all(np.abs(data[:, 4:7].sum(axis=1)) <= 1e-9)


def test_missing_config_writes_nothing(tmp_path, capsys):
    code, d = run(tmp_path, "solve", "--config", str(tmp_path / "nope.ini"))
    assert code == 1 and not d.exists()
    assert "cannot read config" in capsys.readouterr().err


def test_bad_config_reports_position(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[problem]\nexample = ex1\n[flow]\ndt = fast\n")
    code, d = run(tmp_path, "solve", "--config", str(cfg))
    assert code == 1 and not d.exists()
    assert f"{cfg}:4:6:" in capsys.readouterr().err


def test_invalid_lambda_is_usage_error(tmp_path, capsys):
    code, d = run(tmp_path, "solve", "--example", "ex1", "--lambda", "0.6")
    assert code == 1 and not d.exists()
    assert "--allow-invalid-lambda" in capsys.readouterr().err
    code, d = run(tmp_path, "solve", "--example", "ex1", "--lambda", "0.6", "--allow-invalid-lambda", out="o2")
    assert code in (0, 2) and (d / "report.json").exists()


def test_usage_error_from_argparse(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--example", "ex7"])
    assert exc.value.code == 2
    # argparse uses 2; bad values caught after parsing map to 1
    assert main(["solve", "--output", str(tmp_path / "o")]) == 1


def test_solve_horizon_exit_code(tmp_path):
    code, d = run(tmp_path, "solve", "--example", "ex1", "--t-end", "0.5")
    assert code == 2 and report(d)["stop_reason"] == "horizon"


def test_divergence_exit_code_and_partial_record(tmp_path):
    cfg = tmp_path / "blowup.ini"
    cfg.write_text(
        "[problem]\noperator = affine\nmatrix = -10\noffset = 0\nbeta = 10\n"
        "[flow]\nlambda = 0.1\ndt = 1\nt_end = 2000\nx0 = 1\nallow_invalid_lambda = true\n"
    )
    code, d = run(tmp_path, "solve", "--config", str(cfg))
    assert code == 3
    assert report(d)["stop_reason"] == "divergence"
    _, data = read_trajectory_csv(d / "trajectory.csv")
    assert data.shape[0] > 300 and np.all(np.isfinite(data))


def test_iterate_ex3_loss_column(tmp_path):
    code, d = run(tmp_path, "iterate", "--example", "ex3", "--seed", "7", "--lambda", "0.01")
    assert code == 0
    header, data = read_trajectory_csv(d / "iterates.csv")
    assert header[-1] == "loss" and "lyapunov" not in header
    assert np.all(np.diff(data[1:, -1]) <= 1e-12)


def test_iterate_matches_euler_with_unit_step(tmp_path):
    assert main(["iterate", "--example", "ex1", "--relaxation", "1.0", "--output", str(tmp_path / "i")]) == 0
    assert main(["solve", "--example", "ex1", "--dt", "1", "--output", str(tmp_path / "s")]) == 0
    it = (tmp_path / "i" / "iterates.csv").read_text().splitlines()
    so = (tmp_path / "s" / "trajectory.csv").read_text().splitlines()
    n = min(len(it), len(so))
    assert n > 5 and it[:n] == so[:n]


def test_iterate_horizon(tmp_path):
    code, d = run(tmp_path, "iterate", "--example", "ex2", "--max-iters", "5", "--tol", "0")
    assert code == 2
    assert report(d)["iterations_or_steps"] == 5


def test_analyze_ex1(tmp_path, capsys):
    code, d = run(tmp_path, "analyze", "--example", "ex1")
    assert code == 0
    a = json.loads((d / "analysis.json").read_text())
    flags = a["verdict"]["class_flags"]
    assert not flags["pseudomonotone"] and flags["h_pseudomonotone"]
    w = a["verdict"]["witnesses"]["pseudomonotone"]
    assert (w["u"], w["v"]) == ([3.0], [5.0])
    assert "witness u=[3.0] v=[5.0]" in capsys.readouterr().out


def test_analyze_ex2(tmp_path):
    code, d = run(tmp_path, "analyze", "--example", "ex2")
    assert code == 0
    a = json.loads((d / "analysis.json").read_text())
    assert a["lipschitz_estimate"] <= 5.12
    assert not a["verdict"]["class_flags"]["monotone"]
    assert a["verdict"]["witnesses"]["monotone"]["value"] == pytest.approx(-0.1312, abs=1e-3)
    assert a["lambda_min"] == pytest.approx(0.381966, abs=1e-6)
    assert a["lipschitz_upper_bound"] == pytest.approx(problems.EX2_BETA, abs=1e-4)


def test_analyze_zero_operator(tmp_path):
    cfg = tmp_path / "zero.ini"
    cfg.write_text("[problem]\noperator = zero\ndim = 2\nprox = interval\nlo = -1\nhi = 1\n")
    code, d = run(tmp_path, "analyze", "--config", str(cfg))
    assert code == 0
    a = json.loads((d / "analysis.json").read_text())
    flags = a["verdict"]["class_flags"]
    assert flags["monotone"] and flags["pseudomonotone"] and flags["h_pseudomonotone"]
    assert a["verdict"]["mu_estimate"] is None and a["lipschitz_estimate"] == 0.0


@pytest.mark.parametrize("cmd", ["solve", "iterate", "analyze"])
def test_outputs_are_deterministic(tmp_path, cmd):
    args = [cmd, "--example", "ex3" if cmd != "solve" else "ex1", "--seed", "3", "--no-timing"]
    main([*args, "--output", str(tmp_path / "a")])
    main([*args, "--output", str(tmp_path / "b")])
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("FBF_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["iterate", "--example", "ex1"]) == 0
    assert (tmp_path / "env" / "report.json").exists()
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[problem]\nexample = ex1\n[output]\ndir = {tmp_path / 'fromcfg'}\n")
    assert main(["iterate", "--config", str(cfg)]) == 0
    assert (tmp_path / "fromcfg" / "report.json").exists()


def test_cli_flags_override_config(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[problem]\nexample = ex1\n[iter]\nlambda = 0.1\nmax_iters = 3\n")
    code, d = run(tmp_path, "iterate", "--config", str(cfg), "--lambda", "0.2")
    assert code == 2
    rep = report(d)
    assert rep["lambda"] == 0.2 and rep["iterations_or_steps"] == 3


def test_batch_jobs_write_separate_directories(tmp_path):
    a, b = tmp_path / "first.ini", tmp_path / "second.ini"
    a.write_text("[problem]\nexample = ex1\n[flow]\nlambda = 0.25\n")
    b.write_text("[problem]\nexample = ex1\n[flow]\nlambda = 0.4\nt_end = 1\n")
    code = main(["solve", "--config", str(a), "--config", str(b), "--jobs", "2", "--output", str(tmp_path / "batch")])
    assert code == 2  # worst exit code of the batch
    assert report(tmp_path / "batch" / "first")["stop_reason"] == "tolerance"
    assert report(tmp_path / "batch" / "second")["stop_reason"] == "horizon"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fbf_mvi", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "solve" in res.stdout
