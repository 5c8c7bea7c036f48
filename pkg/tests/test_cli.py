import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from optretire import cli


def run(argv):
    return cli.main([str(a) for a in argv])


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(ln for ln in fh if not ln.startswith("#")))


def files_of(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_solve_classic(tmp_path):
    assert run(["solve", "--A", 1, "--alpha", 1, "--M", 10, "--out", tmp_path]) == 0
    rows = read_rows(tmp_path / "gfunction.csv")
    assert rows[0] == ["x", "g", "g_prime", "f0", "V"]
    x, g, gp, f0, V = rows[1]
    assert float(x) == 0.0 and float(g) == 1.0 and gp == "-inf" and float(f0) == 0.0
    assert 0 < float(V) < 10
    assert float(rows[-1][4]) == 0.0
    header = (tmp_path / "gfunction.csv").read_text().splitlines()[1]
    assert "-inf" in header  # the marker is documented
    doc = json.loads((tmp_path / "gfunction.json").read_text())
    assert doc["params"] == {"A": 1.0, "alpha": 1.0, "M": 10.0}
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert list(man) == ["command", "params", "version", "timestamp"]


def test_solve_half_critical(tmp_path):
    assert run(["solve", "--alpha", 0.5, "--A", 1, "--M", 10, "--out", tmp_path]) == 0
    rows = read_rows(tmp_path / "gfunction.csv")[1:]
    x = np.array([float(r[0]) for r in rows])
    g = np.array([float(r[1]) for r in rows])
    assert np.max(np.abs(g - np.exp(-2 * x))) < 1e-8
    assert all(r[3] == "nan" for r in rows)


def test_solve_degenerate(tmp_path, capsys):
    assert run(["solve", "--alpha", 0.4, "--out", tmp_path]) == cli.EXIT_DOMAIN
    assert "degenerate regime: use fast-retire" in capsys.readouterr().err


def test_solve_rejects_alpha_above_one(tmp_path):
    assert run(["solve", "--alpha", 1.2, "--out", tmp_path]) == cli.EXIT_DOMAIN


def test_simulate_zero(tmp_path, capsys):
    assert run(["simulate", "--x", 4, "--strategy", "zero", "--M", 10, "--paths", 20, "--out", tmp_path, "--hit-times"]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert abs(res["mean"] - 6.0) <= 1e-3
    assert len((tmp_path / "hit_times.csv").read_text().splitlines()) == 20
    assert "analytic 6.0" in capsys.readouterr().out


def test_simulate_exit_codes(tmp_path):
    assert run(["simulate", "--strategy", "nonsense", "--out", tmp_path]) == cli.EXIT_PARSE
    assert run(["simulate", "--out", tmp_path]) == cli.EXIT_USAGE
    assert run(["simulate", "--strategy", "zero", "--x", 0, "--tmax", 1, "--paths", 3, "--out", tmp_path]) == cli.EXIT_DEGENERATE
    assert run(["simulate", "--strategy", "optimal", "--alpha", 0.3, "--out", tmp_path]) == cli.EXIT_DOMAIN
    assert run(["simulate", "--strategy", "zero", "--x", 11, "--out", tmp_path]) == cli.EXIT_DOMAIN


def test_usage_errors_from_argparse():
    with pytest.raises(SystemExit) as info:
        run(["nosuchcommand"])
    assert info.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        run(["solve", "--grid", "many"])
    assert info.value.code == cli.EXIT_USAGE


def test_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    import optretire.gsolve as gs

    monkeypatch.setattr(gs, "MAX_ITER", 0)
    assert run(["solve", "--alpha", 0.75, "--grid", 11, "--out", tmp_path]) == cli.EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_compare(tmp_path):
    argv = ["compare", "--x", 5, "--M", 10, "--paths", 400, "--seed", 1, "--out", tmp_path]
    argv += ["--strategy", "optimal", "--strategy", "zero", "--strategy", "const:5"]
    assert run(argv) == 0
    rows = read_rows(tmp_path / "compare.csv")
    assert rows[0] == cli.COMPARE_HEADER
    table = {r[0]: dict(zip(rows[0], r)) for r in rows[1:]}
    assert float(table["optimal"]["mean"]) < float(table["zero"]["mean"])
    assert float(table["const:5.0"]["ruined_fraction"]) > 0
    assert table["const:5.0"]["expected_time"] == "inf"
    assert table["const:5.0"]["analytic"] == ""
    assert abs(float(table["zero"]["gap"])) < 1e-3


def test_compare_needs_two(tmp_path):
    assert run(["compare", "--strategy", "zero", "--out", tmp_path]) == cli.EXIT_USAGE


def test_figures(tmp_path):
    assert run(["figures", "--out", tmp_path]) == 0
    f1 = read_rows(tmp_path / "fig1.csv")
    ys = [float(r[0]) for r in f1[1:]]
    hs = [float(r[1]) for r in f1[1:]]
    assert ys[0] == 0.05 and ys[-1] == 8.0
    i = int(np.argmin(hs))
    assert hs[i] == 1.0 and ys[i] == 1.0
    f2 = read_rows(tmp_path / "fig2.csv")
    assert [float(v) for v in f2[1]] == [0.0, 1.0]
    f3 = read_rows(tmp_path / "fig3.csv")
    assert [float(v) for v in f3[1]] == [0.0, 0.0]
    f4 = read_rows(tmp_path / "fig4.csv")
    assert [float(v) for v in f4[-1]] == [10.0, 0.0]
    assert (tmp_path / "fig4.csv").read_bytes().count(b"\r") == 0


def test_fast_retire(tmp_path, capsys):
    assert run(["fast-retire", "--alpha", 0.4, "--target", 0.1, "--M", 10, "--out", tmp_path]) == 0
    rep = json.loads((tmp_path / "fast_retire.json").read_text())
    assert rep["expected_time"] <= 0.1 and rep["eps"] == pytest.approx(1 / (1 + rep["c"]))
    cs = {}
    for a in (0.49, 0.3):
        d = tmp_path / str(a)
        assert run(["fast-retire", "--alpha", a, "--target", 1.0, "--out", d]) == 0
        cs[a] = json.loads((d / "fast_retire.json").read_text())["c"]
    assert cs[0.49] > cs[0.3]
    assert run(["fast-retire", "--alpha", 0.5, "--out", tmp_path]) == cli.EXIT_DOMAIN
    assert run(["fast-retire", "--alpha", 0.49, "--target", 1e-3, "--out", tmp_path]) == cli.EXIT_UNATTAINABLE


def test_fast_retire_confirmation(tmp_path):
    argv = ["fast-retire", "--alpha", 0.4, "--target", 1.0, "--confirm-paths", 50, "--dt", 1e-4, "--out", tmp_path]
    assert run(argv) == 0
    rep = json.loads((tmp_path / "fast_retire.json").read_text())
    assert math.isfinite(rep["mc_mean"]) and rep["mc_std_error"] > 0


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\npaths = 7\ndt = 0.01\nseed = 5\n")
    out = tmp_path / "o"
    assert run(["simulate", "--config", cfg, "--strategy", "zero", "--x", 1, "--seed", 9, "--out", out]) == 0
    params = json.loads((out / "manifest.json").read_text())["params"]
    assert params["paths"] == 7 and params["dt"] == 0.01 and params["seed"] == 9
    assert params["grid"] == 2001  # built-in default
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(["simulate", "--config", bad, "--strategy", "zero", "--out", out]) == cli.EXIT_USAGE


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--alpha", 0.75, "--grid", 201],
        ["simulate", "--x", 3, "--strategy", "optimal", "--paths", 100, "--seed", 4, "--hit-times"],
        ["compare", "--x", 3, "--strategy", "optimal", "--strategy", "const:2", "--paths", 100],
        ["figures"],
        ["fast-retire", "--alpha", 0.3, "--target", 0.5],
    ],
    ids=["solve", "simulate", "compare", "figures", "fast-retire"],
)
def test_manifest_rerun_is_byte_identical(tmp_path, argv):
    first = tmp_path / "first"
    assert run(argv + ["--out", first]) == 0
    second = tmp_path / "second"
    assert run(["rerun", first / "manifest.json", "--out", second]) == 0
    assert files_of(first) == files_of(second)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "optretire", "solve", "--grid", "51", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "gfunction.csv").exists()
