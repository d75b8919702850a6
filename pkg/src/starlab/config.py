"""Run configuration: YAML files validated against a JSON schema.

A configuration names densities and bodies once and refers to them by key
from a list of experiments.  Unknown keys are rejected anywhere in the
document.  See ``configs/default.yaml`` for the reference suite and the
README for a field-by-field description.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema
import yaml

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}

DENSITY_SCHEMA = {
    "type": "object",
    "required": ["family"],
    "additionalProperties": False,
    "properties": {
        "family": {
            "enum": [
                "uniform-ball",
                "shifted-uniform-ball",
                "uniform-cube",
                "uniform-annulus",
                "gaussian",
                "truncated-gaussian",
                "mixture",
                "radial-step",
                "custom-grid",
            ]
        },
        "n": {"type": "integer", "minimum": 1},
        "radius": _NUM,
        "center": _NUM_LIST,
        "half_width": _NUM,
        "r_in": _NUM,
        "r_out": _NUM,
        "sigma": _NUM,
        "mean": _NUM_LIST,
        "truncation": _NUM,
        "components": {"type": "array", "items": {"$ref": "#/$defs/density"}, "minItems": 1},
        "weights": _NUM_LIST,
        "radii": _NUM_LIST,
        "values": {"type": "array"},
        "path": {"type": "string"},
        "normalize": {"type": "boolean"},
        "lo": _NUM_LIST,
        "hi": _NUM_LIST,
    },
}

BODY_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["segment", "euclidean_ball", "ball", "cube", "cross_polytope", "l2_sum", "scaled",
                          "cm_alpha", "rotated"]},
        "m": _POS_INT,
        "v": _NUM_LIST,
        "radius": _NUM,
        "half_width": _NUM,
        "alpha": _NUM,
        "factor": _NUM,
        "left": {"$ref": "#/$defs/body"},
        "right": {"$ref": "#/$defs/body"},
        "body": {"$ref": "#/$defs/body"},
        "matrix": {"type": "array", "items": _NUM_LIST},
    },
}

_COMMON = {
    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "type": {"enum": ["rearrangement", "ball_flattening", "busemann", "convergence", "moment_bound", "cefpp"]},
    "resolution": {"type": "integer", "minimum": 8},
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["name", "type"],
    "additionalProperties": False,
    "properties": {
        **_COMMON,
        "density": {"type": "string"},
        "densities": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "body": {"type": "string"},
        "p": _NUM,
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"enum": ["exact", "empirical"]},
        "kind": {"enum": ["centroid", "intersection"]},
        "N": _POS_INT,
        "trials": _POS_INT,
        "budget": _POS_INT,
        "coupling": {"enum": ["independent", "polar"]},
        "study": {"enum": ["N_to_infinity", "alpha_to_zero", "m_to_infinity"]},
        "values": _NUM_LIST,
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "Ns": {"type": "array", "items": _POS_INT, "minItems": 2},
        "directions": {"type": "integer", "minimum": 8},
        "measure": {"enum": ["gaussian", "lebesgue-on-ball"]},
        "variant": {"enum": ["rearrangement", "ball_flattening"]},
        "points": _POS_INT,
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "master_seed", "experiments"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "workers": _POS_INT,
        "output_dir": {"type": "string"},
        "densities": {"type": "object", "additionalProperties": {"$ref": "#/$defs/density"}},
        "bodies": {"type": "object", "additionalProperties": {"$ref": "#/$defs/body"}},
        "experiments": {"type": "array", "items": EXPERIMENT_SCHEMA, "minItems": 1},
    },
    "$defs": {"density": DENSITY_SCHEMA, "body": BODY_SCHEMA},
}

# keys that change where or how fast results are produced, not the results
_NON_RESULT_KEYS = ("workers", "output_dir")


class ConfigError(ValueError):
    """Schema or reference error in a run configuration."""


def _path(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "/".join(parts) if parts else "<root>"


def validate(config: dict) -> dict:
    """Validate against the schema and check cross references."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        raise ConfigError(f"config error at {_path(first)}: {first.message}")
    names = set()
    dens = config.get("densities", {})
    bods = config.get("bodies", {})
    for i, exp in enumerate(config["experiments"]):
        if exp["name"] in names:
            raise ConfigError(f"config error at experiments/{i}/name: duplicate name {exp['name']!r}")
        names.add(exp["name"])
        for key in ("density",):
            if key in exp and exp[key] not in dens:
                raise ConfigError(f"config error at experiments/{i}/{key}: unknown density {exp[key]!r}")
        for j, d in enumerate(exp.get("densities", [])):
            if d not in dens:
                raise ConfigError(f"config error at experiments/{i}/densities/{j}: unknown density {d!r}")
        if "body" in exp and exp["body"] not in bods:
            raise ConfigError(f"config error at experiments/{i}/body: unknown body {exp['body']!r}")
    return config


def load(path) -> dict:
    """Read and validate a YAML configuration."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return config


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; list items are addressed by index.

    Values are parsed as YAML scalars, so ``p=0.5`` is a number and
    ``mode=exact`` a string.  An experiment can also be addressed by name,
    e.g. ``experiments.square_exact.p=0.25``.
    """
    config = copy.deepcopy(config)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        parts = key.split(".")
        node = config
        for depth, part in enumerate(parts[:-1]):
            node = _step(node, part, ".".join(parts[: depth + 1]))
        last = parts[-1]
        if isinstance(node, list):
            node[_index(node, last, key)] = value
        elif isinstance(node, dict):
            node[last] = value
        else:
            raise ConfigError(f"override {key!r} does not address a mapping or list")
    return config


def _index(node, part, where):
    if part.lstrip("-").isdigit():
        i = int(part)
        if not -len(node) <= i < len(node):
            raise ConfigError(f"override path {where!r}: index {i} out of range")
        return i
    for i, item in enumerate(node):
        if isinstance(item, dict) and item.get("name") == part:
            return i
    raise ConfigError(f"override path {where!r}: no list item named {part!r}")


def _step(node, part, where):
    if isinstance(node, list):
        return node[_index(node, part, where)]
    if isinstance(node, dict):
        if part not in node:
            node[part] = {}
        return node[part]
    raise ConfigError(f"override path {where!r} does not address a mapping or list")


def config_hash(config: dict) -> str:
    """Short SHA-256 of the result-relevant part of a resolved config."""
    relevant = {k: v for k, v in config.items() if k not in _NON_RESULT_KEYS}
    blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dump(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=False, default_flow_style=None)


def default_config_path() -> Path:
    return Path(__file__).with_name("configs") / "default.yaml"


__all__ = [
    "SCHEMA_VERSION",
    "CONFIG_SCHEMA",
    "ConfigError",
    "validate",
    "load",
    "apply_overrides",
    "config_hash",
    "dump",
    "default_config_path",
]
