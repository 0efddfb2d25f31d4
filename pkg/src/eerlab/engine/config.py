"""Experiment configuration and its sectioned key/value file format.

Example file::

    [experiment]
    strategy = mell
    shift = induced
    n_seed = 100
    n_val = 300
    n_pool = 1000
    n_query = 25
    n_test = 1000
    K = 8
    L = 100
    J = 1000
    T = 50

    [model]
    hidden = 64
    dropout = 0.25

    [data]
    n_classes = 3

Keys are unique across sections, so a bare ``key=value`` override is
unambiguous; ``section.key=value`` is accepted too.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from eerlab.errors import ConfigError
from eerlab.strategies import STRATEGIES

SECTIONS = {
    "experiment": ("strategy", "seed", "shift", "n_seed", "n_val", "n_pool", "n_query",
                   "n_test", "K", "L", "J", "T", "timing"),
    "model": ("hidden", "dropout", "lr", "momentum", "weight_decay", "batch_size",
              "train_iterations", "lr_step"),
    "data": ("n_features", "n_classes", "clusters_per_class", "separation", "cluster_std",
             "brightness_std", "data_seed", "extra_points"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    # experiment (count names follow the usual n_seed ... T table layout)
    strategy: str = "mell"
    seed: int = 0
    shift: str = "none"
    n_seed: int = 100
    n_val: int = 300
    n_pool: int = 1000
    n_query: int = 25
    n_test: int = 1000
    K: int = 8
    L: int = 100
    J: int = 1000
    T: int = 50
    timing: str = "off"
    # model
    hidden: int = 64
    dropout: float = 0.25
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    train_iterations: int = 500
    lr_step: int = 0
    # data
    n_features: int = 2
    n_classes: int = 3
    clusters_per_class: int = 1
    separation: float = 3.0
    cluster_std: float = 1.0
    brightness_std: float = 0.0
    data_seed: int = 0
    extra_points: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}")
        if self.shift not in ("none", "induced"):
            raise ConfigError(f"shift must be 'none' or 'induced', got {self.shift!r}")
        if self.timing not in ("off", "wall"):
            raise ConfigError(f"timing must be 'off' or 'wall', got {self.timing!r}")
        for name in ("n_seed", "n_val", "n_pool", "n_query", "n_test", "L", "J", "T",
                     "hidden", "batch_size", "n_features", "clusters_per_class"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("K", "train_iterations", "lr_step", "extra_points"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be at least 2")
        if self.n_query * self.K > self.n_pool:
            raise ConfigError("n_query * K exceeds n_pool")
        if self.L > self.n_val:
            raise ConfigError("L exceeds n_val")
        if self.J > self.n_pool:
            raise ConfigError("J exceeds n_pool")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.strategy in ("mell", "mezl", "bald", "entropy_mc") and self.dropout == 0.0:
            raise ConfigError(f"{self.strategy} needs posterior samples; dropout must be positive")

    @property
    def n_total(self) -> int:
        return self.n_seed + self.n_val + self.n_pool + self.n_test + self.extra_points

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, known[key].type, raw)
        return cls(**values)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        data = self.to_dict()
        for section, keys in SECTIONS.items():
            parser[section] = {k: str(data[k]) for k in keys}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)


def _coerce(key: str, type_name, raw):
    type_name = type_name if isinstance(type_name, str) else type_name.__name__
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if type_name == "int":
            return int(raw)
        if type_name == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type_name}") from None
    return raw


def _normalise_key(key: str) -> str:
    key = key.strip()
    if "." in key:
        section, _, key = key.partition(".")
        if section not in SECTIONS or key not in SECTIONS[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
    return key


def parse_overrides(items) -> dict[str, str]:
    """Turn ``["key=value", ...]`` into a mapping, validating key names."""
    out = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key = _normalise_key(key)
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value.strip()
    return out


def read_config_text(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep K, L, J, T upper-case
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser[section].items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = value
    return values


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Read a config file (optional) and apply ``key=value`` overrides."""
    values: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        values.update(read_config_text(path.read_text()))
    values.update(parse_overrides(overrides))
    return ExperimentConfig.from_mapping(values)
