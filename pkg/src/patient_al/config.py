"""Flat ``key = value`` config files.

Blank lines and ``#`` comments are ignored. Cohort generation keys carry a
``cohort.`` prefix in experiment configs; ``gen-data`` spec files may use the
bare names. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .datagen import CohortSpec
from .errors import ConfigError, InvalidInputError, InvalidSpecError
from .harness import ExperimentConfig
from .model import ModelConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_pairs(path) -> list[tuple[int, str, str]]:
    pairs = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs.append((lineno, key, value))
    return pairs


def _coerce(name: str, kind, value: str):
    kind = str(kind)
    try:
        if "bool" in kind:
            v = value.lower()
            if v in _TRUE:
                return True
            if v in _FALSE:
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if "tuple" in kind:
            if value.lower() in ("", "none"):
                return None
            item = int if "int" in kind else float
            return tuple(item(s) for s in value.split(",") if s.strip())
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
        if value.lower() == "none" and "None" in kind:
            return None
        return value
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def _build(cls, values: dict[str, str], label: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in fields:
            raise ConfigError(f"unknown {label} key {key!r}")
        kwargs[key] = _coerce(key, fields[key].type, value)
    try:
        return cls(**kwargs)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"invalid {label} settings: {exc}") from None


def _route(pairs, path):
    model_keys = {f.name for f in dataclasses.fields(ModelConfig)}
    experiment_keys = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"model", "cohort"}
    cohort, model, experiment = {}, {}, {}
    for lineno, key, value in pairs:
        if key.startswith("cohort."):
            cohort[key[len("cohort."):]] = value
        elif key in model_keys:
            model[key] = value
        elif key in experiment_keys:
            experiment[key] = value
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return cohort, model, experiment


def load_cohort_spec(path) -> CohortSpec:
    values = {}
    for _, key, value in read_pairs(path):
        values[key.removeprefix("cohort.")] = value
    spec = _build(CohortSpec, values, "cohort")
    try:
        spec.validate()
    except InvalidSpecError as exc:
        raise ConfigError(str(exc)) from None
    return spec


def load_experiment_config(path, **overrides) -> ExperimentConfig:
    """Parse an experiment config; ``overrides`` (CLI flags) replace file values."""
    path = Path(path)
    cohort, model, experiment = _route(read_pairs(path), path)
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    for key, value in experiment.items():
        kwargs[key] = _coerce(key, fields[key].type, value)
    for key in ("train_csv", "test_csv"):
        if kwargs.get(key):
            p = Path(kwargs[key])
            kwargs[key] = str(p if p.is_absolute() else path.parent / p)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    kwargs["model"] = _build(ModelConfig, model, "model")
    if cohort:
        kwargs["cohort"] = _build(CohortSpec, cohort, "cohort")
    try:
        cfg = ExperimentConfig(**kwargs)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg
