"""Experiment configuration: YAML files merged over per-command defaults.

Unknown keys are rejected and missing keys are reported with their dotted
location (``model.delta1``). Numeric fields accept plain numbers or short
arithmetic strings such as ``"pi/2"``. Model frequencies are given per
2*pi: ``omega1: 10`` means an angular frequency of 20*pi.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import numpy as np
import yaml

from .dynamics import IntegratorConfig
from .errors import ConfigError
from .models import CustomModel, HamiltonianFamily, ModelI, ModelII, compile_expression

MODEL_KEYS = {
    "model1": {"required": ("q", "omega1", "delta1"), "optional": ("delta2",)},
    "model2": {"required": ("q", "B"), "optional": ()},
    "custom": {"required": ("q", "dx", "dy", "dz"), "optional": ("params", "reference_point")},
}

SCHEMA = {
    "model": None,  # validated per variant
    "scheme": str,
    "scan": {
        "mu": str, "nu": str, "axis": str, "start": float, "stop": float, "points": int, "fixed": float,
        "delta2_start": float, "delta2_stop": float, "n_theta": int, "phi": float,
    },
    "dynamics": {"dlam": float, "v": float, "integrator": str, "steps": int},
    "circuit": {"random_instances": int, "seed": int, "shots": int, "benchmark_points": int, "inject_orthogonal": bool},
    "output": {"dir": str, "prefix": str},
}

SCHEMES = ("scheme1", "scheme2", "both", "analytic")

_FIG1_MODEL = {"variant": "model1", "q": 3, "omega1": 10, "delta1": 15, "delta2": 0}

DEFAULTS = {
    "fig1": {
        "model": _FIG1_MODEL,
        "scheme": "both",
        "scan": {"mu": "theta", "nu": "phi", "axis": "theta", "start": 0, "stop": "pi", "points": 21, "fixed": 0},
        "dynamics": {"dlam": "pi/2", "v": 1, "integrator": "magnus4", "steps": 2000},
        "output": {"dir": "out", "prefix": "fig1"},
    },
    "fig2": {
        "model": _FIG1_MODEL,
        "scheme": "both",
        "scan": {"delta2_start": 0, "delta2_stop": 30, "points": 16, "n_theta": 21, "phi": 0},
        "dynamics": {"dlam": "pi/2", "v": 1, "integrator": "magnus4", "steps": 2000},
        "output": {"dir": "out", "prefix": "fig2"},
    },
    "fig3": {
        "model": {"variant": "model2", "q": 3, "B": 15},
        "scheme": "both",
        "scan": {"mu": "x", "nu": "y", "axis": "x", "start": "-2*pi", "stop": "2*pi", "points": 21, "fixed": "pi/2"},
        "dynamics": {"dlam": "pi/2", "v": 1, "integrator": "magnus4", "steps": 2000},
        "output": {"dir": "out", "prefix": "fig3"},
    },
    "circuit-check": {
        "model": _FIG1_MODEL,
        "scheme": "both",
        "circuit": {"random_instances": 100, "seed": 20240611, "benchmark_points": 5, "inject_orthogonal": True},
        "dynamics": {"dlam": "pi/2", "v": 1, "integrator": "magnus4", "steps": 2000},
        "output": {"dir": "out", "prefix": "circuit_check"},
    },
}
DEFAULTS["qgt"] = copy.deepcopy(DEFAULTS["fig1"]) | {"output": {"dir": "out", "prefix": "qgt"}}
DEFAULTS["qgt"]["scan"] = {"mu": "theta", "nu": "phi", "start": "pi/2", "fixed": 0, "axis": "theta", "points": 1}
DEFAULTS["chern"] = copy.deepcopy(DEFAULTS["fig2"]) | {"output": {"dir": "out", "prefix": "chern"}}


def parse_number(value, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(compile_expression(value, ())())
        except (ValueError, SyntaxError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: cannot parse {value!r} ({exc})") from None
    raise ConfigError(f"{where}: expected a number, got {value!r}")


def _coerce(value, kind, where):
    if kind is float:
        return parse_number(value, where)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def _validate_model(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("model: expected a mapping")
    variant = block.get("variant")
    if variant not in MODEL_KEYS:
        raise ConfigError(f"model.variant: expected one of {sorted(MODEL_KEYS)}, got {variant!r}")
    spec = MODEL_KEYS[variant]
    for key in spec["required"]:
        if key not in block:
            raise ConfigError(f"model.{key}: missing required key for variant {variant}")
    out = {"variant": variant}
    for key, value in block.items():
        if key == "variant":
            continue
        if key not in spec["required"] and key not in spec["optional"]:
            raise ConfigError(f"model.{key}: unknown key for variant {variant}")
        if variant == "custom" and key in ("dx", "dy", "dz"):
            out[key] = str(value)
        elif key == "params":
            if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, str) for v in value)):
                raise ConfigError("model.params: expected two parameter names")
            out[key] = tuple(value)
        elif key == "reference_point":
            if not (isinstance(value, list) and len(value) == 2):
                raise ConfigError("model.reference_point: expected two numbers")
            out[key] = tuple(parse_number(v, f"model.reference_point[{i}]") for i, v in enumerate(value))
        else:
            out[key] = parse_number(value, f"model.{key}")
    if out["q"] <= 0:
        raise ConfigError("model.q: must be positive")
    return out


def validate(raw: dict) -> dict:
    """Validate a merged configuration and coerce its values."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a mapping")
    out: dict = {}
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown key")
        kind = SCHEMA[key]
        if key == "model":
            out[key] = _validate_model(value)
        elif isinstance(kind, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a mapping")
            block = {}
            for sub, v in value.items():
                if sub not in kind:
                    raise ConfigError(f"{key}.{sub}: unknown key")
                block[sub] = None if v is None else _coerce(v, kind[sub], f"{key}.{sub}")
            out[key] = block
        else:
            out[key] = _coerce(value, kind, key)
    if "model" not in out:
        raise ConfigError("model: missing required block")
    if out.get("scheme", "both") not in SCHEMES:
        raise ConfigError(f"scheme: expected one of {SCHEMES}, got {out['scheme']!r}")
    scan = out.get("scan", {})
    if "points" in scan and scan["points"] < 1:
        raise ConfigError("scan.points: grid is empty")
    return out


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        # a model block is taken whole so missing physics keys are reported, not defaulted
        if key != "model" and isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(command: str, path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Defaults for ``command``, overlaid by the YAML file at ``path``, then by ``overrides``."""
    raw = copy.deepcopy(DEFAULTS[command])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"<file>: cannot read {path}: {exc}") from None
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"<file>: invalid YAML: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("<root>: expected a mapping")
        raw = _merge(raw, user)
    if overrides:
        raw = _merge(raw, overrides)
    return validate(raw)


def build_family(model_block: dict) -> HamiltonianFamily:
    variant = model_block["variant"]
    q = model_block["q"]
    if variant == "model1":
        model = ModelI.from_cycles(model_block["omega1"], model_block["delta1"], model_block.get("delta2", 0.0))
    elif variant == "model2":
        model = ModelII.from_cycles(model_block["B"])
    else:
        params = model_block.get("params", ("l1", "l2"))
        try:
            model = CustomModel.from_expressions(model_block["dx"], model_block["dy"], model_block["dz"], params,
                                                 model_block.get("reference_point", (0.0, 0.0)))
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(f"model: {exc}") from None
    return HamiltonianFamily(model, q)


def integrator_config(dynamics: dict) -> IntegratorConfig:
    try:
        return IntegratorConfig(method=dynamics.get("integrator", "magnus4"), steps=dynamics.get("steps", 2000))
    except ValueError as exc:
        raise ConfigError(f"dynamics.integrator: {exc}") from None


def scan_grid(scan: dict, family: HamiltonianFamily) -> list[tuple]:
    """Grid of target points: ``points`` values of ``axis`` in [start, stop], other parameter ``fixed``."""
    try:
        axis = family.direction(scan.get("axis", family.param_names[0]))
    except KeyError:
        raise ConfigError(f"scan.axis: unknown parameter {scan.get('axis')!r}") from None
    points = scan.get("points", 21)
    start = scan.get("start", 0.0)
    stop = scan.get("stop", math.pi) if points > 1 else start
    grid = []
    for value in np.linspace(start, stop, points):
        lam = [scan.get("fixed", 0.0)] * 2
        lam[axis] = float(value)
        grid.append(tuple(lam))
    return grid
