"""Strict TOML run configuration.

A config file has a ``[run]`` table and one table named after the preset::

    [run]
    experiment = "fig1"
    seed = 1
    workers = 4
    out = "runs/fig1"

    [fig1]
    seeds = 10
    n = 1000000

Unknown tables or keys are errors, and values are type-checked against the
preset defaults.
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..errors import ArgumentError

__all__ = ["RunConfig", "load_config", "parse_config", "default_out_dir", "OUT_ENV"]

OUT_ENV = "IEDTAILS_OUT"
_RUN_KEYS = {"experiment": str, "seed": int, "workers": int, "out": str}


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "runs")


@dataclass
class RunConfig:
    experiment: str
    seed: int = 0
    workers: int = 1
    out: str = field(default_factory=default_out_dir)
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"experiment": self.experiment, "seed": self.seed, "workers": self.workers,
                "out": self.out, "params": dict(self.params)}


def _check_type(key, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        value = [float(v) if isinstance(default[0], float) else v for v in value] if ok and default else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ArgumentError(f"config key {key!r} has the wrong type: {value!r}")
    return value


def resolve_params(preset_defaults: dict[str, Any], overrides: dict[str, Any], where: str) -> dict:
    params = dict(preset_defaults)
    for key, value in overrides.items():
        if key not in preset_defaults:
            raise ArgumentError(f"unknown key {key!r} in [{where}]; allowed: {sorted(preset_defaults)}")
        if value is None:
            continue
        params[key] = _check_type(key, value, preset_defaults[key])
    return params


def parse_config(doc: dict[str, Any], presets: dict[str, Any]) -> RunConfig:
    doc = dict(doc)
    run = doc.pop("run", None)
    if not isinstance(run, dict):
        raise ArgumentError("config needs a [run] table")
    for key, value in run.items():
        if key not in _RUN_KEYS:
            raise ArgumentError(f"unknown key {key!r} in [run]; allowed: {sorted(_RUN_KEYS)}")
        if not isinstance(value, _RUN_KEYS[key]) or isinstance(value, bool):
            raise ArgumentError(f"[run] {key} must be {_RUN_KEYS[key].__name__}")
    name = run.get("experiment")
    if name not in presets:
        raise ArgumentError(f"unknown experiment {name!r}; expected one of {sorted(presets)}")
    extra = set(doc) - {name}
    if extra:
        raise ArgumentError(f"unknown config tables {sorted(extra)}")
    section = doc.get(name, {})
    if not isinstance(section, dict):
        raise ArgumentError(f"[{name}] must be a table")
    params = resolve_params(presets[name].defaults, section, name)
    cfg = RunConfig(name, run.get("seed", 0), run.get("workers", 1),
                    run.get("out", default_out_dir()), params)
    if cfg.seed < 0 or cfg.workers < 1:
        raise ArgumentError("seed must be >= 0 and workers >= 1")
    return cfg


def load_config(path, presets) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ArgumentError(f"invalid TOML in {path}: {exc}") from None
    return parse_config(doc, presets)
