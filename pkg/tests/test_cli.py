import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

import oracles as O
from nusl.cli import main
from nusl.io import read_matrix, write_matrix

SWEEP_TOML = """
master_seed = 5

[dictionary]
kind = "gaussian"
d = 24
K = 48
seed = 2

[distribution]
kind = "quadratic"

[sweep]
S_range = [2, 6, 10]
n_trials = 6
"""


@pytest.fixture(autouse=True)
def _no_env_out(monkeypatch):
    monkeypatch.delenv("NUSL_OUT_DIR", raising=False)


@pytest.fixture
def dict_file(tmp_path):
    p = tmp_path / "phi.csv"
    write_matrix(p, O.unit_columns(6, 12, np.random.default_rng(0)))
    return p


def test_verify_sampling_example(capsys):
    assert main(["verify-sampling", "--k", "8", "--dist", "linear", "--s", "3"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[-1]["property"] == "median"
    assert all(r["holds"] == "True" for r in rows)
    assert sum(r["property"].startswith("poissonisation") for r in rows) == 51


def test_sample_command(tmp_path):
    assert main(["sample", "--k", "6", "--s", "2", "--dist", "linear", "--n", "20",
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "samples.csv").read_text().splitlines()
    assert len(lines) == 20
    assert all(len(l.split(",")) == 3 for l in lines)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "sample" and man["master_seed"] == 0
    assert len(man["config_hash"]) == 64


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NUSL_OUT_DIR", str(tmp_path))
    assert main(["sample", "--k", "4", "--s", "1", "--n", "3"]) == 0
    assert (tmp_path / "samples.csv").exists() and (tmp_path / "manifest.json").exists()


def test_gram_report_and_sensing(tmp_path, dict_file, capsys):
    assert main(["gram-report", "--dict", str(dict_file), "--dist", "linear", "--s", "2"]) == 0
    row = next(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert set(row) == {"mu", "hw_inf2", "wh_21", "whw_op", "K"} and row["K"] == "12"
    out = tmp_path / "sens"
    assert main(["sensing", "--dict", str(dict_file), "--dist", "linear", "--s", "2",
                 "--kind", "precondition", "--format", "binary", "--out", str(out)]) == 0
    assert read_matrix(out / "psi.bin").shape == (6, 12)
    assert read_matrix(out / "transform.bin").shape == (6, 6)
    assert main(["sensing", "--dict", str(dict_file), "--s", "2", "--kind", "precondition"]) == 1


def test_solve_command(tmp_path):
    dict_file = tmp_path / "q.csv"
    write_matrix(dict_file, O.orthonormal(6, np.random.default_rng(1)))
    phi = read_matrix(dict_file)
    y = phi[:, [1, 4]] @ np.array([1.0, -1.0])
    sig = tmp_path / "y.csv"
    write_matrix(sig, y[None, :])
    for algo in ("omp", "bp"):
        out = tmp_path / algo
        argv = ["solve", "--dict", str(dict_file), "--signal", str(sig), "--algo", algo,
                "--out", str(out)]
        if algo == "omp":
            argv += ["--sparsity", "2"]
        assert main(argv) == 0
        res = json.loads((out / "solve.jsonl").read_text())
        assert res["support_found"] == [2, 5]
    assert main(["solve", "--dict", str(dict_file), "--signal", str(sig), "--algo", "omp"]) == 1


def test_bounds_command(dict_file, capsys):
    assert main(["bounds", "--dict", str(dict_file), "--dist", "uniform", "--s", "2",
                 "--n-trials", "500"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows and all(r["holds"] in ("", "True") for r in rows)


def test_tails_command(tmp_path):
    assert main(["tails", "--statistic", "restricted_row_norm", "--s", "4", "--n-trials", "500",
                 "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["statistic"] == "restricted_row_norm"
    assert "nonvacuous_exercised" in man["summary"]


def test_sweep_jobs_do_not_change_output(tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP_TOML)
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}"
        assert main(["sweep", "--config", str(cfg), "--jobs", jobs, "--out", str(out)]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    m1 = json.loads((tmp_path / "j1" / "manifest.json").read_text())
    m2 = json.loads((tmp_path / "j2" / "manifest.json").read_text())
    assert m1["config_hash"] == m2["config_hash"] and m1["master_seed"] == 5
    assert m1["config"]["S_range"] == [2, 6, 10]
    assert main(["sweep", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "s6")]) == 0
    m3 = json.loads((tmp_path / "s6" / "manifest.json").read_text())
    assert m3["master_seed"] == 6 and m3["config_hash"] != m1["config_hash"]


def test_sweep_failed_cell_exits_2(tmp_path, capsys):
    # all atoms on one line: Phi P Phi* is singular, so every sensed cell fails
    phi = tmp_path / "line.csv"
    write_matrix(phi, np.array([[1.0, 1.0, -1.0], [0.0, 0.0, 0.0]]))
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'[dictionary]\nkind = "file"\npath = "{phi}"\n'
                   '[sweep]\nS_range = [1]\nn_trials = 2\nsensing_modes = ["none", "matched"]\n')
    assert main(["sweep", "--config", str(cfg)]) == 2
    out = capsys.readouterr()
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert len(rows) == 6
    for r in rows:
        assert (r["support_rate"] == "") == (r["sensing_mode"] == "matched")
    assert out.err.count("failed cell") == 3


def test_usage_and_input_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["sweep", "--config", str(tmp_path / "nope.toml")]) == 1
    assert "not found" in capsys.readouterr().err
    assert main(["sample", "--k", "4"]) == 1
    assert main(["sample", "--k", "4", "--s", "1", "--jobs", "0"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert main(["gram-report", "--dict", str(bad), "--s", "1"]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nusl", "sample", "--k", "5", "--s", "2", "--n", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and len(r.stdout.splitlines()) == 2
