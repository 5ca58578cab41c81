"""Experiment configuration files.

A config is a TOML document with the model under ``[r]``/``[p]`` (keys
``drift``, ``sigma2``, ``jump.intensity``, ``jump.law``, ``jump.params``) and
run parameters under ``[run]``.  Presets ship inside the package.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .levy_model import ModelPair, model_from_config

PRESETS = ("example1_powertail", "example1_certain_ruin", "example2_jumps", "arithmetic_lattice")

# run-table keys with their types and defaults
RUN_KEYS: Dict[str, tuple] = {
    "seed": (int, 0),
    "workers": (int, 1),
    "n_replicates": (int, 100_000),
    "eps": (float, 1e-4),
    "u": (list, [2.0, 5.0, 10.0]),
    "method": (str, "paulsen_reduction"),
    "horizon": (float, 16.0),
    "max_horizon": (int, 512),
    "grid_step": (float, 2.0**-10),
    "steps": (int, 16),
    "n_paths": (int, 1),
    "q": (list, []),
    "window": (list, [0.95, 0.999]),
    "n_points": (int, 12),
    "target": (float, None),
    "allow_brownian_p": (bool, False),
    "sup_u": (list, [10.0, 100.0, 1000.0]),
}


@dataclass
class ExperimentConfig:
    model: ModelPair
    run: Dict[str, Any]
    raw: Dict[str, Any] = field(repr=False, default_factory=dict)
    source: Optional[str] = None

    @property
    def seed(self) -> int:
        return int(self.run["seed"])

    @property
    def workers(self) -> int:
        return int(self.run["workers"])

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of the config, seed override included."""
        doc = copy.deepcopy(self.raw)
        doc.setdefault("run", {})["seed"] = self.seed
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _coerce(key: str, kind, value):
    if value is None:
        return None
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is list:
            if not isinstance(value, list):
                raise TypeError
            return [float(v) for v in value]
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"run.{key}", f"expected {kind.__name__}, got {value!r}") from None
    raise AssertionError(kind)


def parse_run(table: Optional[dict]) -> Dict[str, Any]:
    table = table or {}
    if not isinstance(table, dict):
        raise ConfigError("run", "must be a table")
    unknown = sorted(set(table) - set(RUN_KEYS))
    if unknown:
        raise ConfigError(f"run.{unknown[0]}", "unknown key")
    out = {}
    for key, (kind, default) in RUN_KEYS.items():
        out[key] = _coerce(key, kind, table[key]) if key in table else copy.deepcopy(default)
    if out["workers"] < 1:
        raise ConfigError("run.workers", "must be a positive integer")
    if out["seed"] < 0 or out["seed"] >= 2**64:
        raise ConfigError("run.seed", "must be a 64-bit unsigned integer")
    if out["n_replicates"] < 1:
        raise ConfigError("run.n_replicates", "must be positive")
    if not out["eps"] > 0:
        raise ConfigError("run.eps", "must be positive")
    if len(out["window"]) != 2 or not 0 < out["window"][0] < out["window"][1] < 1:
        raise ConfigError("run.window", "must be two quantile levels 0 < lo < hi < 1")
    return out


def config_from_dict(doc: dict, source: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a table")
    unknown = sorted(set(doc) - {"r", "p", "run", "name", "description"})
    if unknown:
        raise ConfigError(unknown[0], "unknown top-level key")
    try:
        model = model_from_config(doc)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("r" if "R" in str(exc) else "p", str(exc)) from None
    return ExperimentConfig(model, parse_run(doc.get("run")), doc, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = tomllib.loads(text.decode())
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("", f"malformed TOML: {exc}") from None
    return config_from_dict(doc, str(path))


def preset_path(name: str):
    if name not in PRESETS:
        raise ConfigError("--preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("levyruin").joinpath("presets", f"{name}.toml")


def load_preset(name: str) -> ExperimentConfig:
    ref = preset_path(name)
    doc = tomllib.loads(ref.read_text())
    return config_from_dict(doc, f"preset:{name}")


def preset_names() -> List[str]:
    return list(PRESETS)
