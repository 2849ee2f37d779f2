"""Run configuration: JSON schema, defaults and typed views used by the CLI."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

import jsonschema

from .acceptance import AcceptanceParams
from .flows import CATALOG_FLOWS
from .spectrum import DEFAULT_K_GRID, SamplerSpec
from .symbols import EQUATIONS
from .pdevalidate import BACKEND_KINDS

_num = {"type": "number"}
_num_list = {"type": "array", "items": _num}
_pos_int = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bas-spectra run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "flow": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["name"],
                    "properties": {"name": {"enum": list(CATALOG_FLOWS)}, "params": _num_list},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["stream_function_modes"],
                    "properties": {
                        "name": {"type": "string"},
                        "stream_function_modes": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                        },
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["vector_potential_modes"],
                    "properties": {
                        "name": {"type": "string"},
                        "vector_potential_modes": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _num, "minItems": 6, "maxItems": 6},
                        },
                    },
                },
            ]
        },
        "symbol": {
            "type": "object",
            "additionalProperties": False,
            "required": ["equation"],
            "properties": {
                "equation": {"enum": list(EQUATIONS)},
                "equilibrium": {"type": "object"},
                "transform": {"type": "boolean"},
            },
        },
        "m": {"type": "array", "items": _num, "minItems": 1},
        "t": {"type": "number", "minimum": 0},
        "k_grid": {"type": "array", "items": _num, "minItems": 1},
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": _pos_int,
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "grid_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "n_directions": _pos_int,
                "include_stagnation": {"type": "boolean"},
                "restricted": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
                "chunk_size": _pos_int,
                "gap_threshold": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "structure": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stretch_tol": {"type": "number", "minimum": 0},
                "tol": {"type": "number", "minimum": 0},
            },
        },
        "conservation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "n_points": _pos_int,
                "seed": {"type": "integer", "minimum": 0},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "negative_control": {"type": "boolean"},
            },
        },
        "pde": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {"enum": list(BACKEND_KINDS)},
                "components": {"enum": [1, 2]},
                "N": {"type": ["integer", "null"], "minimum": 1},
                "N_factor": {"type": "number", "exclusiveMinimum": 0},
                "K": {"type": "array", "items": _pos_int, "minItems": 1},
                "t": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "xi0": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                "b0": {"type": "array", "items": _num, "minItems": 1, "maxItems": 2},
                "envelope": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
                "center": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "cfl": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "certify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "threshold": {"type": "number"},
                "points": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["x", "xi", "mu"],
                        "properties": {
                            "x": _num_list,
                            "xi": _num_list,
                            "mu": _num,
                            "m": _num,
                            "horizon": {"type": "number", "exclusiveMinimum": 0},
                            "bound": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "acceptance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 8}},
                "n_samples": _pos_int,
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "conservation_points": _pos_int,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "trajectory_csv": {"type": "boolean"},
    },
}

DEFAULTS = {
    "flow": {"name": "cellular", "params": [1.0]},
    "symbol": {"equation": "transport", "equilibrium": {}, "transform": False},
    "m": [0.0],
    "t": 1.0,
    "k_grid": list(DEFAULT_K_GRID),
    "sampler": {f.name: f.default for f in fields(SamplerSpec)},
    "structure": {"stretch_tol": 0.1, "tol": 0.05},
    "conservation": {"horizon": 10.0, "n_points": 3, "seed": 0, "tolerance": 1e-6, "negative_control": True},
    "pde": {
        "backend": "advection",
        "components": 2,
        "N": None,
        "N_factor": 3.0,
        "K": [16, 32, 64],
        "t": [1.0],
        "xi0": [1, 0],
        "b0": [0.0, 1.0],
        "envelope": [2, 2],
        "center": [0.0, 0.0],
        "cfl": 0.5,
    },
    "certify": {"threshold": 2.0, "points": []},
    "acceptance": {
        "criteria": [1, 2, 3, 4, 5, 6, 7, 8],
        "n_samples": AcceptanceParams.n_samples,
        "horizon": AcceptanceParams.horizon,
        "conservation_points": AcceptanceParams.conservation_points,
        "seed": AcceptanceParams.seed,
    },
    "trajectory_csv": True,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _location(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        # descend into oneOf branches to name the innermost field
        while err.context:
            err = jsonschema.exceptions.best_match(err.context)
        raise ConfigError(f"config error at {_location(err)}: {err.message}")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("flow", "equilibrium"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(doc: dict) -> dict:
    """Validate and fill defaults; the result is echoed into every report."""
    validate(doc)
    cfg = _merge(DEFAULTS, doc)
    validate(cfg)
    return cfg


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config error at <root>: expected a JSON object")
    return resolve(doc)


def canonical(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a resolved configuration."""

    raw: dict

    @property
    def sampler(self) -> SamplerSpec:
        return SamplerSpec(**self.raw["sampler"])

    @property
    def acceptance(self) -> AcceptanceParams:
        a = self.raw["acceptance"]
        return AcceptanceParams(
            n_samples=a["n_samples"],
            horizon=a["horizon"],
            conservation_points=a["conservation_points"],
            seed=a["seed"],
        )

    @property
    def hash(self) -> str:
        return config_hash(self.raw)
