import csv
import io
import json

import pytest

from hetnet.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_assoc_header(capsys):
    code, out, _ = run(capsys, "analyze", "assoc", "--sweep", "lambda_s=1:3:1")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["lambda_s", "a_m_los", "a_m_nlos", "a_s_los", "a_s_nlos", "n_m", "n_s"]
    assert [float(r[0]) for r in rows[1:]] == [1.0, 2.0, 3.0]


def test_rate_json(capsys, tmp_path):
    out = tmp_path / "rate.json"
    code, _, _ = run(capsys, "analyze", "rate", "--set", "lambda_s=10,M_m=100", "--format", "json",
                     "--out", str(out))
    assert code == 0
    (row,) = json.loads(out.read_text())
    assert row["r_total"] > 0 and "rho1" in row and "quadrature_error" in row
    manifest = json.loads((tmp_path / "rate.json.manifest.json").read_text())
    assert manifest["outputs"] == [str(out)] and len(manifest["config_hash"]) == 64


def test_simulate_schema_and_determinism(capsys, tmp_path):
    paths = []
    for threads in ("1", "2", "1"):
        path = tmp_path / f"sim{len(paths)}.csv"
        code, _, _ = run(capsys, "simulate", "--realizations", "8", "--seed", "42", "--threads", threads,
                         "--set", "lambda_s=2", "--out", str(path))
        assert code == 0
        paths.append(path)
    assert paths[0].read_text().splitlines()[0] == "realization,branch,serving_distance_km,sinr,rate"
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "analyze", "assoc", "--set", "tau=3")[0] == 2
    assert run(capsys, "analyze", "assoc", "--set", "bogus=3")[0] == 2
    assert run(capsys, "analyze", "assoc", "--config", str(tmp_path / "none.cfg"))[0] == 4
    assert run(capsys, "analyze", "assoc", "--out", str(tmp_path / "no" / "dir.csv"))[0] == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text((tmp_path / "x").as_posix() and "alpha_los = 1.5\n")
    code, _, err = run(capsys, "analyze", "assoc", "--config", str(bad))
    assert code == 2 and "missing" in err


def test_nonconvergence_exit_code(capsys):
    # an NLoS exponent of 2 makes the far-field interference integral diverge
    code, _, err = run(capsys, "analyze", "rate", "--set", "alpha_nlos=2.0,alpha_los=1.9")
    assert code == 3 and "numerical" in err


def test_sweep_and_optimize(capsys):
    code, out, _ = run(capsys, "sweep", "varpi", "--grid", "0.2,0.99", "--m-total", "200", "--engine",
                       "association", "--set", "lambda_s=5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["status"] == "ok" and rows[1]["status"].startswith("ConfigError")
    code, out, _ = run(capsys, "optimize", "lambda_s", "--set", "N=10,M_m=20", "--bracket", "1:60",
                       "--tolerance", "1")
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and 1 < float(row["argmax"]) < 60


def test_bad_grid(capsys):
    assert run(capsys, "sweep", "lambda_s", "--grid", "1:x")[0] == 2


def test_reproduce_writes_manifest(capsys, tmp_path):
    code, out, _ = run(capsys, "reproduce", "fig5", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "fig5.csv").exists() and (tmp_path / "fig5.csv.manifest.json").exists()
