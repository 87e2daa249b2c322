from __future__ import annotations

import json

import pytest

from gfrag.config import DEFAULTS, canonical_example, load_config, parse_config
from gfrag.errors import ConfigError
from gfrag.kernel import MonomialKernel, TabulatedKernel


def test_canonical_defaults():
    cfg = parse_config(canonical_example())
    assert isinstance(cfg.kernel, MonomialKernel)
    assert (cfg.params.a_minus, cfg.params.a_plus) == (2.0, 0.5)
    assert cfg.seed == 20240611
    assert cfg.pde == DEFAULTS["pde"]
    assert cfg.mc["n_paths"] == 100000


def test_partial_blocks_merge():
    data = canonical_example()
    data["pde"] = {"n_cells": 1024}
    cfg = parse_config(data)
    assert cfg.pde["n_cells"] == 1024
    assert cfg.pde["t_final"] == DEFAULTS["pde"]["t_final"]


@pytest.mark.parametrize("patch", [
    {"schema_version": 2},
    {"a_plus": 3.0},
    {"a_plus": 2.0},
    {"a_minus": -1.0},
    {"kernel": {"type": "monomial"}},
    {"kernel": {"type": "monomial", "gamma": 0.5}},
    {"kernel": {"type": "table", "s": [0.5, 0.2], "rho": [1, 1]}},
    {"unknown": 1},
    {"pde": {"x_min": 2.0}},
    {"mc": {"f_interval": [2.0, 1.0]}},
    {"pde": {"method": "rk4"}},
    {"kernel": {"type": "table", "file": "missing.csv"}},
])
def test_invalid_configs(patch):
    data = canonical_example()
    data.update(patch)
    with pytest.raises(ConfigError):
        parse_config(data)


def test_table_file(tmp_path):
    (tmp_path / "rho.csv").write_text("# s,rho\n0.1,1.0\n0.5,2.0\n0.9,1.0\n")
    data = canonical_example()
    data["kernel"] = {"type": "table", "file": "rho.csv"}
    (tmp_path / "run.json").write_text(json.dumps(data))
    cfg = load_config(tmp_path / "run.json")
    assert isinstance(cfg.kernel, TabulatedKernel)
    assert cfg.kernel.s.tolist() == [0.1, 0.5, 0.9]


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
