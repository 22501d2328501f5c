import json
import os
import subprocess
import sys

import numpy as np
import pytest

from rpcadpd.cli import main
from rpcadpd.core import classical_pca


@pytest.fixture
def data_csv(tmp_path):
    X = np.random.default_rng(0).standard_normal((10, 3)) * [3.0, 1.0, 0.5]
    path = tmp_path / "data.csv"
    np.savetxt(path, X, delimiter=",", fmt="%.17g")
    return path, X


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_fit_json(data_csv, capsys):
    path, _ = data_csv
    code, out, _ = run(["fit", path, "--alpha", "0.5", "--rank", "2"], capsys)
    assert code == 0 and out.endswith("\n")
    doc = json.loads(out)
    assert len(doc["eigenvalues"]) == 2 and len(doc["eigenvectors"]) == 2
    assert all(len(v) == 3 for v in doc["eigenvectors"])
    assert set(doc) == {"center", "eigenvalues", "eigenvectors", "alpha", "rank", "sigma2",
                        "converged", "iterations", "objective"}


def test_fit_alpha_zero_full(data_csv, capsys):
    path, X = data_csv
    code, out, _ = run(["fit", path, "--alpha", "0", "--rank", "full", "--location", "median"], capsys)
    doc = json.loads(out)
    Z = X - np.median(X, axis=0)
    ref = np.linalg.eigvalsh(Z.T @ Z / 10)[::-1]
    np.testing.assert_allclose(doc["eigenvalues"], ref, rtol=1e-6)


def test_fit_alpha_zero_mean_center_matches_classical(data_csv, capsys):
    path, X = data_csv
    code, out, _ = run(["fit", path, "--alpha", "0", "--rank", "full", "--location", "mdpde",
                        "--location-alpha", "0"], capsys)
    np.testing.assert_allclose(json.loads(out)["eigenvalues"], classical_pca(X).eigenvalues, rtol=1e-6)


def test_fit_auto_rank(tmp_path, capsys):
    X = np.random.default_rng(1).standard_normal((40, 4)) * [5.0, 0.1, 0.1, 0.1]
    path = tmp_path / "d.csv"
    np.savetxt(path, X, delimiter=",")
    code, out, _ = run(["fit", path, "--rank", "auto", "--delta", "0.1"], capsys)
    assert code == 0 and json.loads(out)["rank"] == 1


def test_errors(tmp_path, capsys):
    code, _, err = run(["fit", tmp_path / "missing.csv"], capsys)
    assert code == 2 and "missing.csv" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,x\n")
    code, _, err = run(["fit", bad, "--header"], capsys)
    assert code == 3 and "row 3" in err and "column 2" in err
    code, _, err = run(["simulate", "--scenario", "S9"], capsys)
    assert code == 4 and "S1" in err
    code, _, _ = run(["fit", bad, "--rank", "zero"], capsys)
    assert code in (3, 4)


def test_header_and_delimiter(tmp_path, capsys):
    path = tmp_path / "h.csv"
    path.write_text("x;y\n1;2\n2;1\n3;5\n0;0\n")
    code, out, _ = run(["fit", path, "--header", "--delimiter", ";", "--rank", "1"], capsys)
    assert code == 0 and len(json.loads(out)["center"]) == 2


def test_diagnose_and_verify_round_trip(tmp_path, capsys):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 5)) * [3, 2, 0.3, 0.3, 0.3]
    X[:3, 3] += 8
    data = tmp_path / "x.csv"
    np.savetxt(data, X, delimiter=",", fmt="%.17g")
    diag = tmp_path / "diag.csv"
    code, _, _ = run(["diagnose", data, "--alpha", "0.75", "--rank", "2", "-o", diag], capsys)
    assert code == 0
    lines = diag.read_text().splitlines()
    assert len(lines) == 41 and lines[0] == "row,score_distance,orthogonal_distance,flag"
    assert all(l.split(",")[3] != "Regular" for l in lines[1:4])
    side = json.loads((tmp_path / "diag.csv.json").read_text())
    assert {"sd_cutoff", "od_cutoff", "counts", "fit"} <= set(side)
    fitpath = tmp_path / "fit.json"
    run(["fit", data, "--alpha", "0.75", "--rank", "2", "-o", fitpath], capsys)
    again = tmp_path / "again.csv"
    code, _, _ = run(["verify", data, fitpath, "-o", again], capsys)
    assert code == 0
    a = np.loadtxt(diag, delimiter=",", skiprows=1, usecols=(1, 2))
    b = np.loadtxt(again, delimiter=",", skiprows=1, usecols=(1, 2))
    assert np.abs(a - b).max() <= 1e-12


def test_diagnose_identical_rows(tmp_path, capsys):
    path = tmp_path / "same.csv"
    path.write_text("1,2,3\n" * 6)
    code, out, _ = run(["diagnose", path, "--rank", "2"], capsys)
    rows = out.splitlines()[1:]
    assert code == 0 and len(rows) == 6 and all(r.endswith(",Regular") for r in rows)


def test_select_alpha_cmd(data_csv, capsys):
    path, _ = data_csv
    code, out, _ = run(["select-alpha", path, "--rank", "1", "--grid", "0.5,1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["chosen_alpha"] in (0.5, 1.0) and len(doc["criterion"]) == 2
    code, _, _ = run(["select-alpha", path, "--rank", "1", "--grid", "0.5"], capsys)
    assert code == 4


def test_simulate_rows_and_determinism(capsys):
    args = ["simulate", "--scenario", "S1", "--p", "10", "--B", "5", "--seed", "7", "--methods", "classical"]
    code, out, _ = run(args, capsys)
    assert code == 0 and len(out.splitlines()) == 12  # header + 10 components + summary
    _, again, _ = run(args, capsys)
    assert out == again


def test_simulate_cross_product(capsys):
    code, out, _ = run(["simulate", "--scenario", "S1,S2a", "--p", "4,6", "--B", "2", "--rank", "2",
                        "--methods", "classical,dpd:0.5"], capsys)
    body = out.splitlines()[1:]
    assert code == 0 and len(body) == 2 * 2 * 2 * 3


def test_console_entry_point(data_csv):
    path, _ = data_csv
    res = subprocess.run([sys.executable, "-m", "rpcadpd.cli", "fit", str(path), "--rank", "1"],
                         capture_output=True, text=True, env=dict(os.environ))
    assert res.returncode == 0 and json.loads(res.stdout)["rank"] == 1
