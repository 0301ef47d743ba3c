"""INI-style experiment configuration.

Example::

    [scenario]
    grid_width = 30
    grid_height = 30
    num_objects = 1
    sensing = ideal
    null_noise = gaussian(0, 1)
    alt_noise = gaussian(0, 0.05)

    [experiment]
    procedure = dtbh
    gamma = 0.15
    trials = 10
"""

from __future__ import annotations

import configparser
from dataclasses import fields, replace

from .distributions import parse_density
from .experiments import ExperimentConfig
from .snet import Scenario


class ConfigError(ValueError):
    pass


_INT = {"grid_width", "grid_height", "num_objects", "seed", "k_preset", "trials", "master_seed", "jobs"}
_FLOAT = {"r_eff", "theta", "decay_exp", "d0", "gamma", "epsilon"}
_DENSITY = {"null_noise", "alt_noise"}
_RANGE = {"nonideal_xi_range", "nonideal_theta_range"}


def _value(key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    try:
        if key in _INT:
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        if key in _DENSITY:
            return parse_density(raw)
        if key in _RANGE:
            lo, hi = (float(v) for v in raw.split(","))
            return (lo, hi)
        if key == "budget":
            return int(raw)
        if key == "transform":
            return raw.lower() in ("1", "true", "yes", "on")
        if key == "object_positions":
            pts = [tuple(float(c) for c in pt.split(",")) for pt in raw.split(";")]
            return tuple(pts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    return raw


def _section(parser, name: str, allowed: set[str]) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in allowed:
            raise ConfigError(f"unknown key [{name}] {key}")
        out[key] = _value(key, raw)
    return out


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    extra = set(parser.sections()) - {"scenario", "experiment"}
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    sc_keys = {f.name for f in fields(Scenario)}
    ex_keys = {f.name for f in fields(ExperimentConfig)} - {"scenario"}
    try:
        scenario = Scenario(**_section(parser, "scenario", sc_keys))
        return ExperimentConfig(scenario=scenario, **_section(parser, "experiment", ex_keys))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def override(config: ExperimentConfig, **kw) -> ExperimentConfig:
    """Replace the given fields, skipping ``None`` values."""
    kw = {k: v for k, v in kw.items() if v is not None}
    try:
        return replace(config, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
