import csv
import json

import numpy as np
import pytest

from patrelax.cli import main
from patrelax.io import read_array, write_array

SMALL = {
    "grid": {"n": 32},
    "detectors": {"count": 16},
    "time": {"samples": 64},
    "solver": {"iterations": 40},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_bad_flag_is_usage_error(capsys):
    assert main(["simulate", "--bogus"]) == 1
    assert main(["reconstruct", "--fidelity", "l1", "--data", "x", "--out", "y"]) == 1
    assert "usage" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"grid": {"size": 3}}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "grid.size" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path, cfg_path):
    bad = tmp_path / "bad.rtkd"
    bad.write_bytes(b"XXXX1234")
    assert main(["evaluate", "--recon", str(bad), "--ref", str(bad), "--out", str(tmp_path / "e.csv")]) == 3


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "adjoint" in out


def test_filter_response_bandpass(tmp_path, cfg_path):
    out = tmp_path / "bp.csv"
    assert main(["filter-response", "--config", cfg_path, "--which", "bandpass", "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["freq", "magnitude"]
    assert len(rows) == 1 + 65
    assert {float(r[1]) for r in rows[1:]} == {0.0, 1.0}


def test_simulate_reconstruct_evaluate(tmp_path, cfg_path):
    d = tmp_path / "sim"
    assert main(["simulate", "--config", cfg_path, "--out", str(d)]) == 0
    data = read_array(d / "sinogram.rtkd")
    assert data.shape == (16, 64)
    rec = tmp_path / "rec.rtkd"
    assert main(["reconstruct", "--config", cfg_path, "--data", str(d / "sinogram.rtkd"),
                 "--fidelity", "bandpass", "--out", str(rec)]) == 0
    x = read_array(rec)
    assert x.shape == (32, 32) and x.min() >= 0
    assert (tmp_path / "rec.trace.csv").exists() and (tmp_path / "rec.pgm").exists()
    ev = tmp_path / "ev.csv"
    assert main(["evaluate", "--recon", str(rec), "--ref", str(d / "phantom.rtkd"), "--out", str(ev)]) == 0
    rows = list(csv.reader(open(ev)))
    assert rows[0] == ["name", "psnr", "rel_l2_error"]
    assert np.isfinite(float(rows[1][1]))
    assert main(["evaluate", "--recon", str(rec), "--ref", str(rec), "--out", str(ev)]) == 0
    assert list(csv.reader(open(ev)))[1][1] == "identical"


def test_reconstruct_shape_mismatch(tmp_path, cfg_path):
    bad = tmp_path / "d.rtkd"
    write_array(bad, np.zeros((3, 3)))
    assert main(["reconstruct", "--config", cfg_path, "--data", str(bad),
                 "--fidelity", "l2", "--out", str(tmp_path / "r.rtkd")]) == 2


def test_seed_override(tmp_path, cfg_path):
    for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        assert main(["simulate", "--config", cfg_path, "--seed", seed, "--out", str(tmp_path / name)]) == 0
    a, b, c = (read_array(tmp_path / n / "sinogram.rtkd") for n in "abc")
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_run_experiment(tmp_path, cfg_path, capsys):
    out = tmp_path / "exp"
    assert main(["run-experiment", "--config", cfg_path, "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "metrics.csv")))
    assert [r[0] for r in rows[1:]] == ["l2", "gauss", "bandpass"]
    assert json.loads((out / "meta.json").read_text())["format_version"] == "1"


def test_run_experiment_needs_out(cfg_path):
    assert main(["run-experiment", "--config", cfg_path]) == 2
