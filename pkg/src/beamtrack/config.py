"""Experiment configuration files and ``key=value`` overrides.

A config file is TOML with optional sections. Keys are either the flat
``ExperimentConfig`` field names or the sectioned aliases below, e.g.::

    [mobility]
    kind = "gaussian"
    sigma_phi_sq = 0.75

    [policy]
    gamma = 0.03
"""

from __future__ import annotations

import sys
from dataclasses import fields
from pathlib import Path

from .sim import FIELD_NAMES, ExperimentConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# section -> {key: field}
SECTIONS = {
    "array": {"n_antennas": "n_antennas", "spacing_ratio": "spacing_ratio",
              "angle_min": "angle_min", "angle_max": "angle_max"},
    "grid": {"n_bins": "n_bins"},
    "codebook": {"mode": "codebook_mode"},
    "mobility": {"kind": "mobility", "nu": "nu", "sigma_phi_sq": "sigma_phi_sq",
                 "jump_deg": "jump_deg", "jump_p": "jump_p", "boundary": "boundary",
                 "init_min": "init_min", "init_max": "init_max"},
    "channel": {"snr_db": "snr_db"},
    "policy": {"gamma": "gamma", "selection": "selection", "mi_table_n": "mi_table_n"},
    "baselines": {"algorithm": "algorithm", "ekf_mse_threshold_factor": "ekf_mse_threshold_factor",
                  "ekf_measurement": "ekf_measurement", "p_min": "p_min", "pi_window": "pi_window",
                  "tau_max": "tau_max", "exhaustive_perfect": "exhaustive_perfect"},
    "run": {"horizon": "horizon", "n_episodes": "n_episodes", "seed": "seed"},
}

_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def resolve_key(key: str) -> str:
    """Map a flat or ``section.key`` name to an ExperimentConfig field."""
    if "." in key:
        section, _, name = key.partition(".")
        try:
            return SECTIONS[section][name]
        except KeyError:
            raise ConfigError(f"unknown config key {key!r}") from None
    if key in FIELD_NAMES:
        return key
    raise ConfigError(f"unknown config key {key!r}")


def _coerce(field: str, value):
    kind = _TYPES[field]
    if isinstance(value, str):
        text = value.strip()
        if kind.startswith("float | None") and text.lower() in ("none", "null", ""):
            return None
        try:
            if kind.startswith("int"):
                return int(text)
            if kind.startswith("float"):
                return float(text)
            if kind == "bool":
                if text.lower() in ("1", "true", "yes", "on"):
                    return True
                if text.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(text)
        except ValueError:
            raise ConfigError(f"{field}: cannot parse {value!r} as {kind}") from None
        return text
    if kind == "bool" and not isinstance(value, bool):
        raise ConfigError(f"{field}: expected a boolean, got {value!r}")
    if kind.startswith("int") and not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{field}: expected an integer, got {value!r}")
    if kind.startswith("float") and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind == "str" and not isinstance(value, str):
        raise ConfigError(f"{field}: expected a string, got {value!r}")
    return value


def flatten(doc: dict) -> dict:
    """Flatten a parsed TOML document into ``{field: value}``."""
    out = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                if isinstance(v, dict):
                    raise ConfigError(f"unknown config key {key + '.' + sub!r}")
                field = resolve_key(f"{key}.{sub}")
                out[field] = _coerce(field, v)
        else:
            field = resolve_key(key)
            out[field] = _coerce(field, value)
    return out


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, _, value = text.partition("=")
    field = resolve_key(key.strip())
    return field, _coerce(field, value)


def build_config(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    try:
        return base.replace(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Defaults, then the file at ``path`` (if any), then ``key=value`` overrides."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        values.update(flatten(doc))
    for text in overrides:
        field, value = parse_override(text)
        values[field] = value
    return build_config(values)


def dump_config(cfg: ExperimentConfig) -> str:
    """Sectioned TOML text that round-trips through ``load_config``."""
    d = cfg.to_dict()
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key, field in keys.items():
            v = d[field]
            if v is None:
                continue
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, str):
                s = f'"{v}"'
            else:
                s = repr(v)
            lines.append(f"{key} = {s}")
        lines.append("")
    return "\n".join(lines)
