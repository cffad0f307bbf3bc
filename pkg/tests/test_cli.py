import csv
import json
import pathlib

import numpy as np
import pytest
from click.testing import CliRunner

from cabledorbits import cli
from cabledorbits.central import Configuration
from cabledorbits.model import ConvergenceError


@pytest.fixture
def runner():
    return CliRunner()


def test_central_nondegenerate_exit_zero(runner, tmp_path):
    out = tmp_path / "cen"
    res = runner.invoke(
        cli.main,
        ["central", "--family", "maxwell", "--n-ring", "6", "--mu", "1.0",
         "--alpha", "2.0", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    cfg = Configuration.from_json((out / "configuration.json").read_text())
    assert cfg.n == 7
    doc = json.loads((out / "spectrum.json").read_text())
    assert doc["nondegenerate"] is True


def test_central_hex_floats_round_trip(runner, tmp_path):
    out = tmp_path / "cen"
    res = runner.invoke(
        cli.main,
        ["central", "--family", "lagrange", "--n-ring", "4", "--alpha", "1.0",
         "--out", str(out), "--hex-floats"],
    )
    assert res.exit_code == 0, res.output
    text = (out / "configuration.json").read_text()
    assert "0x1." in text
    cfg = Configuration.from_json(text)
    # bit-exact: re-serialize and compare
    assert cfg.to_json(hex_floats=True) == text


def test_central_divergence_exit_two(runner, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("forced")

    monkeypatch.setattr(cli, "solve_central_configuration", boom)
    res = runner.invoke(cli.main, ["central", "--out", str(tmp_path / "x")])
    assert res.exit_code == 2


def test_central_degenerate_exit_three(runner, tmp_path, monkeypatch):
    import cabledorbits.central as central_mod

    real = cli.nondegeneracy_report

    def fake(cfg, *a, **k):
        rep = real(cfg, *a, **k)
        rep.nondegenerate = False
        return rep

    monkeypatch.setattr(cli, "nondegeneracy_report", fake)
    res = runner.invoke(cli.main, ["central", "--out", str(tmp_path / "x")])
    assert res.exit_code == 3
    res = runner.invoke(
        cli.main, ["central", "--out", str(tmp_path / "y"), "--allow-degenerate"]
    )
    assert res.exit_code == 0


def test_cable_end_to_end_artifacts(runner, tmp_path):
    out = tmp_path / "cab"
    res = runner.invoke(
        cli.main,
        ["cable", "--alpha", "1.0", "-p", "5", "-q", "1", "--modes", "16",
         "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    for name in ("solution.json", "certification.json", "trajectory.csv",
                 "trajectory.png", "modes.png"):
        assert (out / name).exists()
    cert = json.loads((out / "certification.json").read_text())
    assert cert["braid"]["pair_winding"] == 5
    assert cert["ode"]["rk_mismatch"] < 1e-6
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "t"
    assert len(rows) > 100


def test_cable_job_toml_with_flag_override(runner, tmp_path):
    job = tmp_path / "job.toml"
    job.write_text(
        'family = "lagrange"\nn_ring = 3\nalpha = 1.0\np = 7\nq = 1\nL = 16\n'
    )
    out = tmp_path / "cab"
    res = runner.invoke(
        cli.main, ["cable", "--job", str(job), "-p", "5", "--out", str(out)]
    )
    assert res.exit_code == 0, res.output
    doc = json.loads((out / "solution.json").read_text())
    assert doc["pq"] == [5, 1]  # flag overrides the job file


def test_cable_failed_certification_exit_one(runner, tmp_path):
    res = runner.invoke(
        cli.main,
        ["cable", "--alpha", "1.0", "-p", "5", "-q", "1", "--modes", "16",
         "--gtol", "1e-18", "--out", str(tmp_path / "cab")],
    )
    # unreachable gradient tolerance: solver reports divergence
    assert res.exit_code == 2


def test_cable_c2_maxwell(runner, tmp_path):
    out = tmp_path / "cab"
    res = runner.invoke(
        cli.main,
        ["cable", "--family", "maxwell", "--n-ring", "6", "--alpha", "2.0",
         "--case", "c2", "-p", "64", "-q", "1", "--modes", "16", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output


def test_sweep_csv_and_figure(runner, tmp_path):
    out = tmp_path / "sw"
    res = runner.invoke(
        cli.main,
        ["sweep", "--alpha", "1.0", "--p-values", "9,16", "-q", "1",
         "--modes", "16", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["p"] for r in rows] == ["9", "16"]
    assert float(rows[1]["h1_distance"]) < float(rows[0]["h1_distance"])
    assert (out / "sweep.png").exists()
