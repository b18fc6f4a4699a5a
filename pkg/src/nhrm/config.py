"""Experiment configuration: JSON loading, schema and semantic validation.

Validation runs to completion before any computation, so a bad config never
leaves partial output behind.  Every failure is a :class:`ConfigError` naming
the offending field (and the line for JSON syntax errors).
"""
from __future__ import annotations

import copy
import json
import math

import jsonschema

from .errors import ConfigError

__all__ = ["EXPERIMENTS", "SCHEMA", "load_config", "validate_config"]

EXPERIMENTS = ("spectrum_scan", "chern", "zak", "edge_profile", "pump")

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

_model = {
    "type": "object",
    "properties": {
        "lam": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "minimum": -1, "maximum": 1},
        "V": _num,
        "N": _pos_int,
    },
    "required": ["lam"],
    "additionalProperties": False,
}

_loop = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "type": {"enum": ["circle", "polyline", "rectangle"]},
        "center": _point,
        "radius": _num,
        "orientation": {"enum": [1, -1]},
        "vertices": {"type": "array", "items": _point},
        "delta_range": _point,
        "V_range": _point,
    },
    "required": ["type"],
    "additionalProperties": False,
}

_blocks = {
    "spectrum_scan": {
        "type": "object",
        "properties": {
            "path": {"type": "array", "items": _point},
            "closed": {"type": "boolean"},
            "samples_per_edge": _pos_int,
            "boundaries": {
                "type": "array",
                "items": {"enum": ["ring", "open", "weak_link"]},
                "minItems": 1,
            },
            "kappa": _num,
        },
        "required": ["path"],
        "additionalProperties": False,
    },
    "chern": {
        "type": "object",
        "properties": {
            "loops": {"type": "array", "items": _loop},
            "band": {"enum": [1, -1]},
            "nk": _pos_int,
            "nq": _pos_int,
        },
        "required": ["loops"],
        "additionalProperties": False,
    },
    "zak": {
        "type": "object",
        "properties": {
            "points": {"type": "array", "items": _point},
            "band": {"enum": [1, -1]},
            "nk": _pos_int,
        },
        "required": ["points"],
        "additionalProperties": False,
    },
    "edge_profile": {
        "type": "object",
        "properties": {},
        "additionalProperties": False,
    },
    "pump": {
        "type": "object",
        "properties": {
            "kappa": _num,
            "V0": _num,
            "omegas": {"type": "array", "items": _num},
            "n_steps": {"anyOf": [_pos_int, {"type": "null"}]},
            "left_source": {"enum": ["evolved", "both"]},
            "output_stride": {"anyOf": [_pos_int, {"type": "null"}]},
        },
        "required": ["omegas"],
        "additionalProperties": False,
    },
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "model": _model,
        **{name: block for name, block in _blocks.items()},
    },
    "required": ["experiment", "model"],
    "additionalProperties": False,
}

_DEFAULTS = {
    "model": {"delta": 0.5, "V": 0.0, "N": 10},
    "spectrum_scan": {
        "closed": False,
        "samples_per_edge": 40,
        "boundaries": ["ring", "open"],
        "kappa": None,
    },
    "chern": {"band": -1, "nk": 256, "nq": 256},
    "zak": {"band": -1, "nk": 4096},
    "edge_profile": {},
    "pump": {
        "kappa": 0.05,
        "V0": 1.0,
        "n_steps": None,
        "left_source": "evolved",
        "output_stride": None,
    },
}


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _fail(field, msg):
    raise ConfigError(field, msg)


def _check_loop(loop, where):
    kind = loop["type"]
    if kind == "circle":
        loop.setdefault("center", [0.0, 0.0])
        loop.setdefault("orientation", 1)
        if "radius" not in loop:
            _fail(f"{where}.radius", "circle loop needs a radius")
        if not loop["radius"] > 0:
            _fail(f"{where}.radius", f"radius must be positive, got {loop['radius']}")
    elif kind == "polyline":
        verts = loop.get("vertices")
        if not verts or len(verts) < 3:
            _fail(f"{where}.vertices", "polyline needs at least 3 vertices")
    else:
        for key in ("delta_range", "V_range"):
            if key not in loop:
                _fail(f"{where}.{key}", "rectangle needs delta_range and V_range")
            lo, hi = loop[key]
            if not lo < hi:
                _fail(f"{where}.{key}", "range must be increasing")
        loop.setdefault("orientation", 1)


def validate_config(raw: dict, experiment: str | None = None) -> dict:
    """Validate ``raw`` and return a normalized copy with defaults filled in.

    ``experiment`` (from the command line) must match the config's own
    ``experiment`` field when both are given.
    """
    if not isinstance(raw, dict):
        _fail("<root>", "config must be a JSON object")
    cfg = copy.deepcopy(raw)
    if experiment is not None:
        if experiment not in EXPERIMENTS:
            _fail("experiment", f"unknown experiment {experiment!r}")
        cfg.setdefault("experiment", experiment)
        if cfg["experiment"] != experiment:
            _fail("experiment", f"config is for {cfg['experiment']!r}, not {experiment!r}")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        _fail(_path(errors[0]), errors[0].message)

    exp = cfg["experiment"]
    for key in EXPERIMENTS:
        if key != exp and key in cfg:
            _fail(key, f"block not used by experiment {exp!r}")
    model = {**_DEFAULTS["model"], **cfg["model"]}
    for key in ("lam", "delta", "V"):
        if not math.isfinite(model[key]):
            _fail(f"model.{key}", "must be finite")
    cfg["model"] = model
    block = {**_DEFAULTS[exp], **cfg.get(exp, {})}
    cfg[exp] = block

    if exp == "spectrum_scan":
        if len(block["path"]) < 2:
            _fail("spectrum_scan.path", "path needs at least 2 vertices")
        for i, (d, _) in enumerate(block["path"]):
            if not -1 <= d <= 1:
                _fail(f"spectrum_scan.path.{i}", f"delta {d} outside [-1, 1]")
        if "weak_link" in block["boundaries"] and block["kappa"] is None:
            _fail("spectrum_scan.kappa", "weak_link boundary needs kappa")
        if model["N"] < 2:
            _fail("model.N", "real-space chains need N >= 2")
    elif exp == "chern":
        if not block["loops"]:
            _fail("chern.loops", "at least one loop is required")
        for i, loop in enumerate(block["loops"]):
            _check_loop(loop, f"chern.loops.{i}")
    elif exp == "zak":
        if not block["points"]:
            _fail("zak.points", "at least one point is required")
        for i, (d, v) in enumerate(block["points"]):
            if not -1 <= d <= 1:
                _fail(f"zak.points.{i}", f"delta {d} outside [-1, 1]")
            if math.hypot(d, v) < 1e-9:
                _fail(f"zak.points.{i}", "the gap closes at (delta, V) = (0, 0)")
        if block["nk"] < 3:
            _fail("zak.nk", "nk must be at least 3")
    elif exp == "edge_profile":
        if model["delta"] == -1:
            _fail("model.delta", "edge ratio has a pole at delta = -1")
        if model["N"] < 2:
            _fail("model.N", "real-space chains need N >= 2")
    elif exp == "pump":
        if not block["omegas"]:
            _fail("pump.omegas", "omega list is empty")
        for i, w in enumerate(block["omegas"]):
            if not w > 0:
                _fail(f"pump.omegas.{i}", f"omega must be positive, got {w}")
        if model["N"] < 2:
            _fail("model.N", "real-space chains need N >= 2")
        if model["delta"] == -1:
            _fail("model.delta", "edge ratio has a pole at delta = -1")
    return cfg


def load_config(path, experiment=None) -> dict:
    """Read and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}", f"invalid JSON: {exc.msg}") from exc
    return validate_config(raw, experiment)
