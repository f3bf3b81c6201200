import json

import numpy as np
import pytest

from fistalab.cli import main, read_trace_csv, write_trace_csv
from fistalab import SolverConfig, make_convex_qp, run_mfista


@pytest.fixture(autouse=True)
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FISTALAB_OUT", str(tmp_path / "out"))
    return tmp_path


def run_cli(*argv):
    return main(list(argv))


def test_run_smoke(tmp_path, capsys):
    code = run_cli("run", "--problem", "convex-qp", "--n", "4", "--seed", "7",
                   "--solver", "mfista", "--eps", "1e-8", "--out", str(tmp_path / "r1"))
    assert code == 0
    assert (tmp_path / "r1" / "trace.csv").exists()
    manifest = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    assert manifest["status"] == "converged"
    assert manifest["final_vnorm"] <= 1e-8
    assert manifest["iterations"] >= 1
    assert "converged" in capsys.readouterr().out


def test_run_rejects_bad_epsilon(tmp_path, capsys):
    code = run_cli("run", "--problem", "convex-qp", "--n", "2", "--eps", "0")
    assert code == 1
    assert "epsilon must be positive" in capsys.readouterr().err


def test_run_requires_problem_or_instance(capsys):
    assert run_cli("run", "--eps", "1e-6") == 1
    assert "problem" in capsys.readouterr().err


def test_run_not_converged_exit_code(tmp_path):
    code = run_cli("run", "--problem", "convex-qp", "--n", "6", "--seed", "1",
                   "--eps", "1e-300", "--max-iters", "25", "--out", str(tmp_path / "r2"))
    assert code == 2


def test_bad_subcommand_maps_to_error():
    assert run_cli("frobnicate") == 1
    assert run_cli() == 1


def test_reproducible_traces(tmp_path):
    argv = ("run", "--problem", "nonconvex-qp", "--n", "5", "--seed", "3",
            "--eps", "1e-9", "--max-iters", "500")
    assert run_cli(*argv, "--out", str(tmp_path / "a")) in (0, 2)
    assert run_cli(*argv, "--out", str(tmp_path / "b")) in (0, 2)
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_gen_then_run_instance_file(tmp_path):
    inst_file = tmp_path / "inst.txt"
    assert run_cli("gen", "--kind", "lasso-ball", "--n", "6", "--rows", "4",
                   "--seed", "2", "--out", str(inst_file)) == 0
    assert inst_file.exists()
    code = run_cli("run", "--instance", str(inst_file), "--solver", "fista",
                   "--eps", "1e-6", "--out", str(tmp_path / "r3"))
    assert code == 0


def test_trace_csv_round_trip(tmp_path):
    p, _ = make_convex_qp(3, 5)
    res = run_mfista(p, SolverConfig(epsilon=1e-9, max_iters=200, trace_vectors=True),
                     np.zeros(3))
    path = tmp_path / "trace.csv"
    write_trace_csv(res.trace, path)
    header = path.read_text().splitlines()[0]
    assert header == "k,a_k,L_k,vnorm,phi,dxy,dyy,gradevals,proxevals"
    back = read_trace_csv(path, p.lipschitz_L)
    assert len(back) == len(res.trace)
    for col in ("a_k", "L_k", "vnorm", "phi", "dxy", "dyy"):
        np.testing.assert_array_equal(back.column(col), res.trace.column(col))
    assert back.has_vectors  # sidecar written and picked up
    np.testing.assert_array_equal(back.ys[-1], res.trace.ys[-1])


def test_equivalence_mode_matches_mfista(tmp_path):
    common = ("--problem", "convex-qp", "--n", "6", "--seed", "5",
              "--eps", "1e-300", "--max-iters", "200")
    run_cli("run", *common, "--solver", "mfista", "--out", str(tmp_path / "m"))
    run_cli("run", *common, "--solver", "fista", "--step-mode", "quarter-L",
            "--out", str(tmp_path / "f"))
    tm = read_trace_csv(tmp_path / "m" / "trace.csv")
    tf = read_trace_csv(tmp_path / "f" / "trace.csv")
    assert len(tm) == len(tf) == 200
    for col in ("a_k", "L_k", "vnorm", "phi", "dxy", "dyy"):
        np.testing.assert_allclose(tm.column(col), tf.column(col), rtol=0, atol=1e-12)


def test_check_genuine_and_corrupted(tmp_path, capsys):
    rundir = tmp_path / "r4"
    run_cli("run", "--problem", "convex-qp", "--n", "4", "--seed", "2",
            "--eps", "1e-9", "--out", str(rundir))
    assert run_cli("check", str(rundir / "trace.csv")) == 0
    out = capsys.readouterr().out
    assert "CHECK residual_bound PASS" in out
    assert "CHECK lyapunov_monotone N/A" in out  # norms-only trace, no oracle

    # forge one early row: zero the step norms so the aggregated bound
    # collapses while the best residual so far is still large
    lines = (rundir / "trace.csv").read_text().splitlines()
    j = 1 + len(lines) // 4
    cells = lines[j].split(",")
    cells[5] = "0.0"
    cells[6] = "0.0"
    lines[j] = ",".join(cells)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code = run_cli("check", str(bad), "--lipschitz",
                   str(json.loads((rundir / "manifest.json").read_text())["lipschitz_L"]))
    assert code == 1
    assert "CHECK residual_bound FAIL" in capsys.readouterr().out


def test_check_full_trace_with_oracle(tmp_path, capsys):
    rundir = tmp_path / "r5"
    code = run_cli("run", "--problem", "convex-qp", "--n", "3", "--seed", "4",
                   "--eps", "1e-300", "--max-iters", "400", "--trace", "full",
                   "--with-oracle", "--out", str(rundir))
    assert code == 2  # epsilon unreachable, that is fine here
    assert (rundir / "oracle.json").exists()
    code = run_cli("check", str(rundir / "trace.csv"),
                   "--oracle", str(rundir / "oracle.json"))
    out = capsys.readouterr().out
    assert code == 0
    assert "CHECK lyapunov_monotone PASS" in out
    assert "CHECK function_value_bound PASS" in out


def test_check_missing_trace(capsys):
    assert run_cli("check", "/nonexistent/trace.csv") == 1
    assert "no such trace" in capsys.readouterr().err


def test_sweep_summary(tmp_path, capsys):
    inst_file = tmp_path / "qp.txt"
    run_cli("gen", "--kind", "convex-qp", "--n", "4", "--seed", "8",
            "--out", str(inst_file))
    config = {
        "instances": [str(inst_file),
                      {"kind": "nonconvex-qp", "n": 4, "seed": 1},
                      {"kind": "lasso-ball", "n": 6, "rows": 4, "seed": 2}],
        "solvers": ["mfista", "proxgrad"],
        "epsilons": [1e-7],
        "max_iters": 4000,
    }
    cfg_path = tmp_path / "sweep.json"
    cfg_path.write_text(json.dumps(config))
    code = run_cli("sweep", str(cfg_path), "--out", str(tmp_path / "sw"))
    lines = (tmp_path / "sw" / "summary.csv").read_text().splitlines()
    assert lines[0] == "instance,solver,eps,iterations,final_vnorm,slope,status"
    assert len(lines) == 1 + 3 * 2  # instances x solvers x epsilons
    assert code in (0, 2)
    statuses = [ln.split(",")[-1] for ln in lines[1:]]
    assert all(s in ("converged", "max_iters_reached") for s in statuses)
    float(lines[1].split(",")[5])  # slope column parses (may be nan)


def test_run_config_file_with_flag_override(tmp_path):
    cfg = {"problem": "convex-qp", "n": 4, "seed": 9, "eps": 1e-7, "solver": "proxgrad"}
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "r6"
    code = run_cli("run", "--config", str(cfg_path), "--solver", "mfista",
                   "--out", str(out))
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["solver"] == "mfista"  # flag beat the file
    assert manifest["config"]["seed"] == 9


def test_default_out_root_env(tmp_path):
    code = run_cli("run", "--problem", "convex-qp", "--n", "3", "--seed", "1",
                   "--eps", "1e-7")
    assert code == 0
    root = tmp_path / "out"
    dirs = list(root.iterdir())
    assert len(dirs) == 1
    assert (dirs[0] / "trace.csv").exists()
