"""Experiment configuration: YAML files, dotted overrides and validation."""
import copy
import logging
import os
from pathlib import Path

import yaml

from trustdyn.models import ExperimentConfig, IntegratorConfig
from trustdyn.services.payoffs import ParameterError, validate_params

logger = logging.getLogger(__name__)

COMMANDS = ("equilibria", "trajectory", "phase-portrait", "regime-map", "basin", "mc-check")
FORMATS = ("csv", "json")
THREADS_ENV = "TRUSTDYN_THREADS"

# Section defaults per command; file values are merged over these
DEFAULT_OPTIONS = {
    "equilibria": {"tol": 1e-9, "interior": True},
    "trajectory": {"starts": [], "classify_eps": 1e-4},
    "phase-portrait": {"resolution": 21},
    "regime-map": {"lambda_range": None, "alpha_range": None, "resolution": 100, "tol": 1e-9},
    "basin": {"grid_resolution": 101, "sweep": None, "cells": False, "tol": 1e-9},
    "mc-check": {"state": None, "sample_count": 100000, "z_limit": 5.0},
}

# Section name in the YAML document for each command
SECTIONS = {
    "equilibria": "equilibria",
    "trajectory": "trajectory",
    "phase-portrait": "portrait",
    "regime-map": "regime_map",
    "basin": "basin",
    "mc-check": "mc_check",
}


class ConfigError(ValueError):
    """Raised for invalid configuration; the message names the offending key."""


def load_config(path) -> dict:
    """Load one YAML configuration document."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Configuration file not found at {path}")
    except yaml.YAMLError as e:
        raise ValueError(f"Invalid YAML in {path}: {e}")

    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ValueError(f"Configuration in {path} must be a mapping, got {type(document).__name__}")
    return document


def apply_overrides(config: dict, overrides) -> dict:
    """Return a copy of config with each ``dotted.key=value`` applied; values are parsed as YAML."""
    result = copy.deepcopy(config)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw_value = item.split("=", 1)
        parts = [part for part in key.strip().split(".")]
        if not key.strip() or any(not part for part in parts):
            raise ConfigError(f"override {item!r} has an empty key")
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as e:
            raise ConfigError(f"override {key}: cannot parse value {raw_value!r}: {e}")

        node = result
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = value
        logger.debug(f"Override {key} = {value!r}")
    return result


def resolve_threads(cli_value=None, source: str = "--threads") -> int:
    """Thread count from the flag, else the environment, else 1."""
    if cli_value is not None:
        raw = cli_value
    elif os.environ.get(THREADS_ENV):
        raw, source = os.environ[THREADS_ENV], THREADS_ENV
    else:
        return 1
    try:
        threads = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{source} must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"{source} must be at least 1, got {threads}")
    return threads


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be a mapping")
    return value


def _int(value, key: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {value}")
    return int(value)


def _float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _pair(value, key: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{key} must be a two-element list, got {value!r}")
    return (_float(value[0], f"{key}[0]"), _float(value[1], f"{key}[1]"))


def _point(value, key: str, alpha: float) -> tuple:
    x_i, x_t = _pair(value, key)
    if not (0.0 <= x_i <= alpha and 0.0 <= x_t <= 1.0 - alpha):
        raise ConfigError(f"{key} = {[x_i, x_t]} lies outside [0, {alpha}] x [0, {1.0 - alpha}]")
    return (x_i, x_t)


def _sweep_values(sweep: dict, key: str) -> list:
    if "values" in sweep:
        values = sweep["values"]
        if not isinstance(values, list):
            raise ConfigError(f"{key}.values must be a list")
        return [_float(v, f"{key}.values[{k}]") for k, v in enumerate(values)]
    try:
        start, stop, count = sweep["start"], sweep["stop"], sweep["count"]
    except KeyError as e:
        raise ConfigError(f"{key} needs either values or start/stop/count (missing {e.args[0]})")
    count = _int(count, f"{key}.count", 0)
    start, stop = _float(start, f"{key}.start"), _float(stop, f"{key}.stop")
    if count == 1:
        return [start]
    return [start + (stop - start) * k / (count - 1) for k in range(count)]


def _validate_options(command: str, options: dict, params, section: str) -> dict:
    alpha = params.alpha
    if command == "equilibria":
        options["tol"] = _float(options["tol"], f"{section}.tol")
        options["interior"] = bool(options["interior"])
    elif command == "trajectory":
        starts = options["starts"]
        if not isinstance(starts, list) or not starts:
            raise ConfigError(f"{section}.starts must be a non-empty list of [x_i, x_t] pairs")
        options["starts"] = [_point(s, f"{section}.starts[{k}]", alpha) for k, s in enumerate(starts)]
        options["classify_eps"] = _float(options["classify_eps"], f"{section}.classify_eps")
    elif command == "phase-portrait":
        options["resolution"] = _int(options["resolution"], f"{section}.resolution", 2)
    elif command == "regime-map":
        for name in ("lambda_range", "alpha_range"):
            if options[name] is None:
                raise ConfigError(f"{section}.{name} is not set")
            options[name] = _pair(options[name], f"{section}.{name}")
        resolution = options["resolution"]
        if isinstance(resolution, list):
            options["resolution"] = tuple(
                _int(v, f"{section}.resolution[{k}]", 1) for k, v in enumerate(_pair(resolution, f"{section}.resolution"))
            )
        else:
            options["resolution"] = _int(resolution, f"{section}.resolution", 1)
        options["tol"] = _float(options["tol"], f"{section}.tol")
    elif command == "basin":
        options["grid_resolution"] = _int(options["grid_resolution"], f"{section}.grid_resolution", 1)
        options["cells"] = bool(options["cells"])
        options["tol"] = _float(options["tol"], f"{section}.tol")
        sweep = options["sweep"]
        if sweep is not None:
            if not isinstance(sweep, dict):
                raise ConfigError(f"{section}.sweep must be a mapping")
            axis = sweep.get("axis")
            if axis not in ("alpha", "lambda"):
                raise ConfigError(f"{section}.sweep.axis must be alpha or lambda, got {axis!r}")
            options["sweep"] = {"axis": axis, "values": _sweep_values(sweep, f"{section}.sweep")}
    elif command == "mc-check":
        if options["state"] is None:
            raise ConfigError(f"{section}.state is not set")
        options["state"] = _point(options["state"], f"{section}.state", alpha)
        options["sample_count"] = _int(options["sample_count"], f"{section}.sample_count", 2)
        options["z_limit"] = _float(options["z_limit"], f"{section}.z_limit")
    return options


def _threads(flag, raw: dict) -> int:
    if flag is not None:
        return resolve_threads(flag)
    if raw.get("threads") is not None:
        return resolve_threads(raw["threads"], source="threads")
    return resolve_threads()


def build_experiment_config(command: str, raw: dict, out=None, fmt=None, seed=None,
                            threads=None) -> ExperimentConfig:
    """Validate a merged configuration document; flag arguments win over file values."""
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
    if raw.get("command") not in (None, command):
        logger.warning(f"Config file is for {raw.get('command')!r}; running {command!r}")

    try:
        params = validate_params(_section(raw, "params"))
    except ParameterError as e:
        raise ConfigError(f"params: {e}")

    integrator_section = _section(raw, "integrator")
    try:
        integrator = IntegratorConfig(**integrator_section)
    except TypeError as e:
        raise ConfigError(f"integrator: {e}")
    except ValueError as e:
        raise ConfigError(f"integrator: {e}")

    section = SECTIONS[command]
    options = dict(DEFAULT_OPTIONS[command])
    options.update(_section(raw, section))
    options = _validate_options(command, options, params, section)

    output = _section(raw, "output")
    out_path = out if out is not None else output.get("path")
    if not out_path:
        raise ConfigError("output.path is not set (use --out)")
    out_format = fmt if fmt is not None else output.get("format", "csv")
    if out_format not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}, got {out_format!r}")

    seed_value = seed if seed is not None else raw.get("seed", 0)
    seed_value = _int(seed_value, "seed", 0)
    if seed_value >= 2 ** 64:
        raise ConfigError(f"seed must fit in 64 bits, got {seed_value}")

    return ExperimentConfig(
        command=command,
        params=params,
        integrator=integrator,
        options=options,
        seed=seed_value,
        threads=_threads(threads, raw),
        out_path=Path(out_path),
        out_format=out_format,
    )
