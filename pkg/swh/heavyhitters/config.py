# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Experiment configuration.

A configuration file holds a ``heavy_hitters`` section, a flat mapping of the
keys of :data:`CONFIG_SCHEMA`::

    heavy_hitters:
      mechanism: jl
      n: 1000
      N: 256
      epsilon: 1.0
"""

from dataclasses import asdict, dataclass, fields, replace
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import jsonschema
from jsonschema.exceptions import ValidationError
import yaml

from swh.core.config import load_from_envvar, read_raw_config
from swh.heavyhitters.bucket_hh import K1_RULES
from swh.heavyhitters.harness import (
    MECHANISMS,
    Custom,
    DataKind,
    Planted,
    UniformBits,
    Zipf,
)
from swh.heavyhitters.jl_hh import DEFAULT_GAMMA
from swh.heavyhitters.privacy import PrivacyBudget

SEED_ENVVAR = "LDPHH_SEED"

with open(
    os.path.join(os.path.dirname(__file__), "schemas", "experiment_config.json")
) as schema_file:
    CONFIG_SCHEMA: Dict[str, Any] = json.load(schema_file)

# configuration keys that differ from the field names
_FIELD_KEYS = {"universe_size": "N"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a batch of seeded runs."""

    mechanism: str = "jl"
    n: int = 1000
    universe_size: int = 256
    epsilon: float = 1.0
    delta: float = 1e-5
    beta: float = 0.1
    data: str = "zipf:2"
    """data generator, see :func:`parse_data_kind`"""
    seeds: int = 1
    master_seed: int = 0
    gamma: float = DEFAULT_GAMMA
    inverse_square_gamma: bool = False
    sparsity: Optional[int] = None
    repeats: int = 1
    k1_rule: str = "exact-recovery"
    jobs: int = 1
    out: Optional[str] = None
    unsafe_no_noise: bool = False
    replacement_dp: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Check the invariants the mechanisms will enforce, before any run.

        Raises:
            ValueError: on the first invalid parameter
        """
        try:
            jsonschema.validate(self.to_dict(), CONFIG_SCHEMA)
        except ValidationError as e:
            path = ".".join(str(p) for p in e.absolute_path)
            raise ValueError(f"Invalid configuration {path}: {e.message}") from e
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"Unknown mechanism '{self.mechanism}'")
        if self.k1_rule not in K1_RULES:
            raise ValueError(f"Unknown k1 rule '{self.k1_rule}'")
        if self.repeats % 2 == 0:
            raise ValueError(f"repeats must be odd, got {self.repeats}")
        if self.inverse_square_gamma and self.n < 2:
            raise ValueError("The 1/n^2 distortion needs at least two clients")
        kind = parse_data_kind(self.data)
        if isinstance(kind, UniformBits) and self.universe_size != 2:
            raise ValueError("The uniformbits data generator needs N = 2")
        if isinstance(kind, Planted):
            if kind.hh_index >= self.universe_size:
                raise ValueError(
                    f"Planted index {kind.hh_index} is outside the universe"
                )
            if kind.hh_count > self.n:
                raise ValueError(f"Planted count {kind.hh_count} exceeds n={self.n}")
        if isinstance(kind, Custom) and len(kind.counts) != self.universe_size:
            raise ValueError(
                f"Count file has {len(kind.counts)} entries, expected "
                f"N={self.universe_size}"
            )

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(
            epsilon=self.epsilon, delta=self.delta, replacement=self.replacement_dp
        )

    def to_dict(self) -> Dict[str, Any]:
        return {_FIELD_KEYS.get(k, k): v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        keys = {_FIELD_KEYS.get(f.name, f.name): f.name for f in fields(cls)}
        unknown = set(values) - set(keys)
        if unknown:
            raise ValueError(
                f"Unknown configuration keys: {', '.join(sorted(unknown))}"
            )
        return cls(**{keys[k]: v for k, v in values.items()})

    def override(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def read_count_file(path: str) -> Custom:
    """Read a histogram written as whitespace separated non-negative integers."""
    try:
        counts = tuple(int(token) for token in Path(path).read_text().split())
    except ValueError as e:
        raise ValueError(f"Count file {path} must only hold integers") from e
    if any(c < 0 for c in counts):
        raise ValueError(f"Count file {path} holds negative counts")
    return Custom(counts=counts)


def parse_data_kind(text: str) -> DataKind:
    """Parse a data generator description.

    >>> parse_data_kind("planted:3:70")
    Planted(hh_index=3, hh_count=70)
    >>> parse_data_kind("zipf:2")
    Zipf(exponent=2.0)
    """
    name, _, argument = text.partition(":")
    try:
        if name == "planted":
            index, count = argument.split(":")
            return Planted(hh_index=int(index), hh_count=int(count))
        if name == "zipf":
            return Zipf(exponent=float(argument))
    except ValueError as e:
        raise ValueError(f"Invalid data generator '{text}': {e}") from e
    if name == "uniformbits" and not argument:
        return UniformBits()
    if name == "file" and argument:
        return read_count_file(argument)
    raise ValueError(
        f"Invalid data generator '{text}', expected planted:INDEX:COUNT, "
        "zipf:EXPONENT, uniformbits or file:PATH"
    )


def emit_config(config: ExperimentConfig) -> str:
    """Flat YAML text, one ``key: value`` per line."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=False)


def parse_config(text: str) -> ExperimentConfig:
    values = yaml.safe_load(text) or {}
    if not isinstance(values, dict):
        raise ValueError("An experiment configuration must be a mapping")
    return ExperimentConfig.from_dict(values)


def get_config(config_file: Optional[str] = None) -> Dict[str, Any]:
    """Read the ``heavy_hitters`` section of the configuration file ``config_file``.

    If an environment variable ``SWH_CONFIG_FILENAME`` is defined, this
    takes precedence over the ``config_file`` parameter.
    """
    raw_config: Dict[str, Any] = {}
    if os.environ.get("SWH_CONFIG_FILENAME"):
        raw_config.update(load_from_envvar())
    elif config_file:
        raw_config.update(read_raw_config(config_file))
    return raw_config.get("heavy_hitters") or {}


def seed_from_environment() -> Optional[int]:
    """Master seed set in the :data:`SEED_ENVVAR` environment variable, if any."""
    seed = os.environ.get(SEED_ENVVAR)
    if not seed:
        return None
    try:
        return int(seed)
    except ValueError as e:
        raise ValueError(f"{SEED_ENVVAR} must be an integer, got '{seed}'") from e


def load_config(
    config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    """Defaults, then the configuration file, then ``overrides``, then the
    :data:`SEED_ENVVAR` environment variable for the master seed."""
    values = dict(get_config(config_file))
    for name, value in (overrides or {}).items():
        values[_FIELD_KEYS.get(name, name)] = value
    seed = seed_from_environment()
    if seed is not None:
        values["master_seed"] = seed
    return ExperimentConfig.from_dict(values)
