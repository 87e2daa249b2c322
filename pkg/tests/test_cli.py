from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from gfrag.cli import CONSTANT_KEYS, main
from gfrag.config import canonical_example

SMALL_MC = {"n_paths": 20000, "t": 3.0, "occupation_time": 2e5, "martingale_times": [1.0]}
SMALL_PDE = {"x_min": 1e-2, "x_max": 1e2, "n_cells": 256, "t_final": 5.0, "n_obs": 6}


def write_config(path, **patch):
    data = canonical_example()
    data.update(patch)
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def cfg(tmp_path):
    return write_config(tmp_path / "run.json", mc=SMALL_MC, pde=SMALL_PDE,
                        profile={"x_min": 0.5, "x_max": 8.0, "n_points": 5})


def run(*args):
    return main([str(a) for a in args])


# -- classify --------------------------------------------------------------------------
@pytest.mark.parametrize("a_plus, a_minus, code, regime", [
    (0.5, 2.0, 0, "StrictMalthusian"),
    (1.0, 2.0, 10, "BoundaryLow"),
    (0.5, 0.9, 11, "FailsHigh"),
])
def test_classify(tmp_path, capsys, a_plus, a_minus, code, regime):
    c = write_config(tmp_path / "c.json", a_plus=a_plus, a_minus=a_minus)
    assert run("classify", "--config", c) == code
    d = json.loads(capsys.readouterr().out)
    assert d["regime"] == regime
    assert d["lambda_star"] == pytest.approx(0.5)


def test_classify_csv(cfg, capsys):
    assert run("classify", "--config", cfg, "--format", "csv") == 0
    rows = dict(csv.reader(capsys.readouterr().out.splitlines()[1:]))
    assert rows["regime"] == "StrictMalthusian"


# -- profile ---------------------------------------------------------------------------
def test_profile_outputs(cfg, tmp_path):
    out = tmp_path / "prof"
    assert run("profile", "--config", cfg, "--out", out) == 0
    consts = json.loads((out / "constants.json").read_text())
    assert set(CONSTANT_KEYS) <= set(consts)
    assert consts["lambda"] == pytest.approx(0.5)
    assert consts["beta_plus"] == pytest.approx(1.0)
    assert consts["beta_minus"] == pytest.approx(0.5)
    assert consts["c3"] == pytest.approx(1 / 3)
    rows = list(csv.DictReader((out / "profile.csv").open()))
    at_two = [r for r in rows if float(r["x"]) == pytest.approx(2.0)]
    assert float(at_two[0]["nu"]) == pytest.approx(1 / 6)
    assert at_two[0]["branch"] == "tail"
    assert (out / "profile.svg").read_text().startswith("<svg")


def test_profile_outside_strict_regime(tmp_path):
    c = write_config(tmp_path / "c.json", a_plus=0.5, a_minus=0.9)
    out = tmp_path / "prof"
    assert run("profile", "--config", c, "--out", out) == 3
    consts = json.loads((out / "constants.json").read_text())
    assert set(CONSTANT_KEYS) <= set(consts)
    assert consts["lambda"] == pytest.approx(0.5)
    assert consts["total_mass"] is None and consts["c1"] is None


# -- simulate / pde ----------------------------------------------------------------------
def test_simulate(cfg, tmp_path):
    out = tmp_path / "mc"
    assert run("simulate", "--config", cfg, "--out", out) == 0
    est = {e["estimator"]: e for e in json.loads((out / "estimates.json").read_text())["estimates"]}
    total = est["feynman_kac_total"]
    assert abs(total["value"] - total["expected"]) <= 3 * total["stderr"]
    assert est["occupation"]["mass_above_one"] == pytest.approx(2 / 3, abs=0.02)
    assert est["L_tilted"]["value"] == pytest.approx(1.0)


def test_simulate_byte_identical(cfg, tmp_path):
    for d in ("a", "b"):
        assert run("simulate", "--config", cfg, "--out", tmp_path / d, "--format", "csv") == 0
    for name in ("estimates.csv", "occupation.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run("simulate", "--config", cfg, "--out", tmp_path / "c", "--seed", "7",
               "--format", "csv") == 0
    assert (tmp_path / "a" / "estimates.csv").read_bytes() != \
        (tmp_path / "c" / "estimates.csv").read_bytes()


def test_pde_outputs(cfg, tmp_path):
    out = tmp_path / "pde"
    # t_final = 5 is far from stationary: outputs are written, then exit 5
    assert run("pde", "--config", cfg, "--out", out) == 5
    summary = json.loads((out / "pde_summary.json").read_text())
    assert summary["converged"] is False
    rows = list(csv.DictReader((out / "pde_series.csv").open()))
    assert len(rows) == 6
    assert (out / "pde_profile.csv").exists()


def test_pde_cfl_violation(tmp_path):
    c = write_config(tmp_path / "c.json", pde=dict(SMALL_PDE, dt=1.0))
    assert run("pde", "--config", c, "--out", tmp_path / "o") == 4


def test_config_errors(tmp_path):
    bad = write_config(tmp_path / "c.json", a_plus=3.0)
    assert run("classify", "--config", bad) == 2
    assert run("classify", "--config", tmp_path / "missing.json") == 2
    assert run("simulate", "--config", bad, "--threads", "0") == 2


def test_verify_subset(cfg, tmp_path):
    out = tmp_path / "v"
    assert run("verify", "--config", cfg, "--out", out, "--only", "1", "2", "3") == 0
    report = json.loads((out / "report.json").read_text())
    assert [c["status"] for c in report["criteria"]] == ["pass"] * 3


def test_verify_boundary_not_applicable(tmp_path):
    c = write_config(tmp_path / "c.json", a_plus=1.0, a_minus=2.0)
    out = tmp_path / "v"
    # convergence checks are skipped; not-applicable does not fail the run
    assert run("verify", "--config", c, "--out", out, "--only", "5", "6", "7", "8", "9") == 0
    report = json.loads((out / "report.json").read_text())
    assert {x["status"] for x in report["criteria"]} == {"not-applicable"}


def test_module_entry_point(cfg):
    r = subprocess.run([sys.executable, "-m", "gfrag", "classify", "--config", cfg],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["regime"] == "StrictMalthusian"
