"""YAML experiment configuration.

Every scenario field defaults to the standard single-BS setup, so an empty
file is a valid configuration. Example::

    scenario:
      ue_position: [50, 10, 20]
      ris_positions: [[30, -5, 2]]
      pathloss_direct: 4.5
    sweep:
      variable: inv_sigma2_db      # or L_d
      values: [95, 100, 105, 110]
    trials: 200
    seed: 7
    methods: [proposed, direct_only]
    output: results.csv
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .exceptions import ConfigError
from .pipeline import METHODS
from .scenario import Scenario

SWEEP_ALIASES = {
    "inv_sigma2_db": "inv_sigma2_db",
    "snr_db": "inv_sigma2_db",
    "L_d": "pathloss_direct",
    "pathloss_direct": "pathloss_direct",
    "L_r": "pathloss_reflect",
    "pathloss_reflect": "pathloss_reflect",
}
MULTI_METHODS = ("multi_bs_ue", "single")
KINDS = ("single", "multi_bs_ue")
OUTPUT_DIR_ENV = "RISPOS_OUTPUT_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    sweep_variable: str = "inv_sigma2_db"
    sweep_values: tuple = (95.0, 100.0, 105.0, 110.0)
    trials: int = 200
    seed: int = 0
    methods: tuple = ("proposed",)
    output_path: str | None = None
    kind: str = "single"
    bs_positions: tuple = ((0.0, 0.0, 0.0), (0.0, 10.0, 0.0))
    ue_positions: tuple = ((50.0, 10.0, 20.0), (52.0, 10.0, 20.0))
    noiseless: bool = False
    raw_slots: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_ALIASES:
            raise ConfigError(f"unknown sweep variable {self.sweep_variable!r}")
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not self.sweep_values:
            raise ConfigError("sweep values must be non-empty")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        allowed = METHODS if self.kind == "single" else MULTI_METHODS
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ConfigError(f"methods {bad} not available for kind {self.kind!r}; choose from {allowed}")
        if self.raw_slots is not None and self.raw_slots < 1:
            raise ConfigError("raw_slots must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "methods", tuple(self.methods))

    def scenario_at(self, value: float) -> Scenario:
        return replace(self.scenario, **{SWEEP_ALIASES[self.sweep_variable]: float(value)})


_SCENARIO_FIELDS = {f.name for f in fields(Scenario)}
# YAML 1.1 reads exponents without a sign (1.0e8) as strings
_NUMERIC = {f.name: {"float": float, "int": int}[f.type] for f in fields(Scenario) if f.type in ("float", "int")}


def scenario_from_dict(d: dict | None) -> Scenario:
    d = dict(d or {})
    unknown = set(d) - _SCENARIO_FIELDS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        for key, kind in _NUMERIC.items():
            if isinstance(d.get(key), str):
                d[key] = kind(d[key])
        return Scenario(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def config_from_dict(d: dict | None) -> ExperimentConfig:
    d = dict(d or {})
    known = {"scenario", "sweep", "trials", "seed", "methods", "output", "kind", "multi", "noiseless",
             "raw_slots", "workers"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {"scenario": scenario_from_dict(d.get("scenario"))}
    sweep = d.get("sweep") or {}
    if "variable" in sweep:
        kw["sweep_variable"] = sweep["variable"]
    if "values" in sweep:
        kw["sweep_values"] = tuple(sweep["values"])
    for key, name in (("trials", "trials"), ("seed", "seed"), ("output", "output_path"), ("kind", "kind"),
                      ("noiseless", "noiseless"), ("raw_slots", "raw_slots"), ("workers", "workers")):
        if key in d and d[key] is not None:
            kw[name] = d[key]
    if "methods" in d:
        kw["methods"] = tuple(d["methods"])
    elif d.get("kind") == "multi_bs_ue":
        kw["methods"] = MULTI_METHODS
    multi = d.get("multi") or {}
    if "bs_positions" in multi:
        kw["bs_positions"] = tuple(tuple(float(x) for x in p) for p in multi["bs_positions"])
    if "ue_positions" in multi:
        kw["ue_positions"] = tuple(tuple(float(x) for x in p) for p in multi["ue_positions"])
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping")
    return config_from_dict(data)


def resolve_output(path) -> Path:
    """Relative output paths are placed under ``$RISPOS_OUTPUT_DIR`` when it is set."""
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        return Path(base) / p
    return p
