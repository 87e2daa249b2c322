"""Run configuration: a single JSON file checked against a versioned schema."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, DomainError
from .kernel import FragmentationKernel, ModelParams, kernel_from_config

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kernel", "a_minus", "a_plus"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kernel": {
            "oneOf": [
                {"type": "object", "additionalProperties": False,
                 "required": ["type", "gamma"],
                 "properties": {"type": {"const": "monomial"}, "gamma": _POS}},
                {"type": "object", "additionalProperties": False,
                 "required": ["type", "s", "rho"],
                 "properties": {"type": {"const": "table"},
                                "s": {"type": "array", "items": _NUM, "minItems": 2},
                                "rho": {"type": "array", "items": _NUM, "minItems": 2}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["type", "file"],
                 "properties": {"type": {"const": "table"}, "file": {"type": "string"}}},
            ]
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "a_minus": _POS,
        "a_plus": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "profile": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "x_min": _POS, "x_max": _POS,
                "n_points": {"type": "integer", "minimum": 2},
                "svg": {"type": "boolean"},
                "inversion_rtol": _POS,
            },
        },
        "mc": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n_paths": _POS_INT,
                "t": _POS,
                "x0": _POS,
                "f_interval": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "L_q": {"type": ["number", "null"]},
                "t_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "occupation_time": _POS,
                "martingale_times": {"type": "array", "items": _POS},
                "events_log": {"type": "boolean"},
            },
        },
        "pde": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "x_min": _POS, "x_max": _POS,
                "n_cells": {"type": "integer", "minimum": 2},
                "t_final": _POS,
                "dt_safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "method": {"enum": ["euler", "heun"]},
                "n_obs": {"type": "integer", "minimum": 2},
                "f_interval": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
        },
    },
}

DEFAULTS = {
    "epsilon": 0.5,
    "seed": 0,
    "output_dir": "out",
    "profile": {"x_min": 1e-4, "x_max": 1e4, "n_points": 401, "svg": True,
                "inversion_rtol": 1e-5},
    "mc": {"n_paths": 100000, "t": 6.0, "x0": 1.0, "f_interval": [1.0, 2.0], "L_q": None,
           "t_max": None, "occupation_time": 1e6, "martingale_times": [1.0, 5.0, 10.0],
           "events_log": False},
    "pde": {"x_min": 1e-4, "x_max": 1e4, "n_cells": 4096, "t_final": 60.0,
            "dt_safety": 0.9, "dt": None, "method": "euler", "n_obs": 61,
            "f_interval": [1.0, 2.0]},
}


@dataclass
class RunConfig:
    params: ModelParams
    kernel: FragmentationKernel
    seed: int
    output_dir: Path
    profile: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    pde: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def _read_table_file(path: Path) -> tuple[list, list]:
    if not path.is_file():
        raise ConfigError(f"kernel table file not found: {path}")
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return data["s"], data["rho"]
    arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if arr.shape[1] != 2:
        raise ConfigError(f"{path}: expected two columns s, rho")
    return arr[:, 0].tolist(), arr[:, 1].tolist()


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def parse_config(data: dict, base_dir: Path | str = ".") -> RunConfig:
    """Validate ``data`` and build the model objects; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}") from None
    a_minus, a_plus = float(data["a_minus"]), float(data["a_plus"])
    if not a_plus < a_minus:
        raise ConfigError("need a_plus < a_minus")
    kspec = dict(data["kernel"])
    if "file" in kspec:
        p = Path(kspec.pop("file"))
        s, rho = _read_table_file(p if p.is_absolute() else Path(base_dir) / p)
        kspec.update(s=s, rho=rho)
    eps = data.get("epsilon", DEFAULTS["epsilon"])
    try:
        kernel = kernel_from_config(kspec, eps)
        params = ModelParams(a_minus, a_plus)
    except (DomainError, ValueError) as e:
        raise ConfigError(str(e)) from None
    prof = _merge(DEFAULTS["profile"], data.get("profile", {}))
    mc = _merge(DEFAULTS["mc"], data.get("mc", {}))
    pde = _merge(DEFAULTS["pde"], data.get("pde", {}))
    if not prof["x_min"] < prof["x_max"]:
        raise ConfigError("profile: need x_min < x_max")
    if not pde["x_min"] < 1 < pde["x_max"]:
        raise ConfigError("pde: need x_min < 1 < x_max")
    for blk, name in ((mc, "mc"), (pde, "pde")):
        lo, hi = blk["f_interval"]
        if not 0 <= lo < hi:
            raise ConfigError(f"{name}: f_interval must satisfy 0 <= lo < hi")
    if not all(math.isfinite(float(t)) for t in mc["martingale_times"]):
        raise ConfigError("mc: martingale_times must be finite")
    out = Path(data.get("output_dir", DEFAULTS["output_dir"]))
    return RunConfig(params, kernel, int(data.get("seed", DEFAULTS["seed"])), out,
                     prof, mc, pde, data)


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return parse_config(data, path.parent)


def canonical_example() -> dict:
    """The reference configuration: unit monomial kernel, growth rates 0.5 and 2."""
    return {"schema_version": SCHEMA_VERSION, "kernel": {"type": "monomial", "gamma": 1.0},
            "epsilon": 0.5, "a_minus": 2.0, "a_plus": 0.5, "seed": 20240611}
