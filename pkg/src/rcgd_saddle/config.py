"""Experiment configuration files and JSON result emission.

A config has three sections, ``objective``, ``stepsize`` and ``experiment``.
It may be a JSON object or an INI-style file whose values are JSON literals
(bare words are read as strings). A quadratic's ``H`` may be given inline or as
a path to a CSV file, resolved relative to the config file.
"""

from __future__ import annotations

import configparser
import datetime as _dt
import json
import math
import os
from pathlib import Path

import numpy as np

from .objective import make_objective
from .sample_path import StepsizeRange

SECTIONS = ("objective", "stepsize", "experiment")
OUTPUT_DIR_ENV = "RCGD_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _literal(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    else:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        raw = {s: {k: _literal(v) for k, v in parser.items(s)} for s in parser.sections()}
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = {s: dict(raw.get(s, {})) for s in SECTIONS}
    cfg["_base"] = str(path.parent)
    return cfg


def apply_overrides(cfg, overrides):
    """Apply ``section.key=value`` strings; values are JSON literals."""
    for item in overrides or ():
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot or section not in SECTIONS or not name:
            raise ConfigError(f"bad override {item!r}; expected section.key=value")
        cfg.setdefault(section, {})[name] = _literal(value)
    return cfg


def empty_config():
    return {s: {} for s in SECTIONS} | {"_base": "."}


def _matrix(value, base):
    if isinstance(value, str):
        p = Path(value)
        if not p.is_absolute():
            p = Path(base) / p
        return np.loadtxt(p, delimiter=",", ndmin=2)
    return np.asarray(value, dtype=float)


def build_objective(cfg):
    params = dict(cfg["objective"])
    name = params.pop("name", None)
    if name is None:
        raise ConfigError("objective.name is required")
    if "H" in params:
        params["H"] = _matrix(params["H"], cfg.get("_base", "."))
    try:
        return make_objective(name, params)
    except KeyError as exc:
        raise ConfigError(f"objective {name!r} needs parameter {exc}") from None


def build_stepsizes(cfg):
    s = cfg["stepsize"]
    try:
        return StepsizeRange(float(s["alpha_min"]), float(s["alpha_max"]))
    except KeyError as exc:
        raise ConfigError(f"stepsize.{exc.args[0]} is required") from None


def jsonable(obj):
    """Recursively convert numpy values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def output_path(command, explicit=None):
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{command}.json"


def write_result(path, command, cfg, result):
    """Write the result document. Only ``timestamp`` differs between identical runs."""
    doc = {
        "command": command,
        "config": {s: cfg.get(s, {}) for s in SECTIONS},
        "result": result,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def write_series_csv(path, columns: dict):
    """Plot data as a CSV of equal-length named columns."""
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if not isinstance(v, str) else v for v in row) + "\n")
