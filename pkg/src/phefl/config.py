"""YAML experiment files <-> :class:`ExperimentConfig`."""

from __future__ import annotations

import hashlib
import json
from dataclasses import fields
from pathlib import Path

import yaml

from .exceptions import ConfigurationError
from .orchestrator import ExperimentConfig

SCHEMA_VERSION = 1
REQUIRED_KEYS = ("schema_version", "scenario", "strategy", "rounds")

_INT_KEYS = {"rounds", "epochs", "batch_size", "num_edges", "devices_per_edge", "num_classes",
             "samples_per_device", "edge_aggregation_frequency", "seed", "synthetic_dim",
             "synthetic_test_per_label"}
_FLOAT_KEYS = {"lr", "ptd_fraction", "synthetic_separation", "forced_alpha"}
_STR_KEYS = {"scenario", "strategy", "test_mode", "data_source"}
_IDX_KEYS = {"train_images", "train_labels", "test_images", "test_labels"}


def _coerce(key, value):
    if key == "forced_alpha" and value is None:
        return None
    if key == "idx_paths":
        if value is None:
            return None
        if not isinstance(value, dict) or set(value) - _IDX_KEYS:
            raise ConfigurationError(f"idx_paths: expected a mapping with keys from {sorted(_IDX_KEYS)}")
        return {k: str(v) for k, v in value.items()}
    if key == "hidden_dims":
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigurationError("hidden_dims: expected a list of integers")
        return tuple(value)
    if key in _INT_KEYS:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigurationError(f"{key}: expected an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigurationError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigurationError(f"{key}: expected a string, got {value!r}")
        return value
    raise ConfigurationError(f"{key}: unknown key")


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)} | {"schema_version"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigurationError(f"{unknown[0]}: unknown key")
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise ConfigurationError(f"{key}: required key missing")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigurationError(f"schema_version: unsupported version {doc['schema_version']!r}")
    kwargs = {k: _coerce(k, v) for k, v in doc.items() if k != "schema_version"}
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "strategy":
            value = value.value
        elif f.name == "hidden_dims":
            value = list(value)
        out[f.name] = value
    return out


def load_config(path) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML ({exc})") from exc
    return config_from_dict(doc)


def dump_config(config: ExperimentConfig, path=None) -> str:
    text = yaml.safe_dump(config_to_dict(config), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def config_fingerprint(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
