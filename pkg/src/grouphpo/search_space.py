"""Hyperparameter domains, configurations and prior sampling.

A :class:`SearchSpace` is an ordered tuple of :class:`ParamDomain` objects.
Configurations are plain ``dict`` objects mapping parameter name to value;
callers treat them as values and never mutate one that was handed to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
import yaml

CONTINUOUS = "continuous"
LOG_CONTINUOUS = "log_continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, LOG_CONTINUOUS, INTEGER, CATEGORICAL)

Configuration = dict


class InvalidConfiguration(ValueError):
    """Raised when a configuration does not fit its search space."""

    def __init__(self, errors: Sequence[tuple[str, str]]):
        self.errors = list(errors)
        detail = "; ".join(f"{name}: {reason}" for name, reason in self.errors)
        super().__init__(f"invalid configuration ({detail})")


@dataclass(frozen=True)
class ParamDomain:
    """Value domain of a single hyperparameter.

    Attributes:
        name: Parameter identifier.
        kind: One of ``continuous``, ``log_continuous``, ``integer`` or
            ``categorical``.
        low, high: Inclusive bounds for the numeric kinds.
        choices: Ordered choice list for ``categorical``.
        default: Default value, always a member of the domain.
    """

    name: str
    kind: str
    default: Any
    low: float | None = None
    high: float | None = None
    choices: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            object.__setattr__(self, "choices", tuple(self.choices))
            if not self.choices:
                raise ValueError(f"{self.name}: categorical domain needs choices")
            if len(set(self.choices)) != len(self.choices):
                raise ValueError(f"{self.name}: duplicate choices")
        else:
            if self.low is None or self.high is None:
                raise ValueError(f"{self.name}: numeric domain needs bounds")
            if self.kind == INTEGER:
                if not (float(self.low).is_integer() and float(self.high).is_integer()):
                    raise ValueError(f"{self.name}: integer bounds must be whole numbers")
                object.__setattr__(self, "low", int(self.low))
                object.__setattr__(self, "high", int(self.high))
                if self.low > self.high:
                    raise ValueError(f"{self.name}: low > high")
            else:
                object.__setattr__(self, "low", float(self.low))
                object.__setattr__(self, "high", float(self.high))
                if not self.low < self.high:
                    raise ValueError(f"{self.name}: low must be < high")
                if self.kind == LOG_CONTINUOUS and self.low <= 0:
                    raise ValueError(f"{self.name}: log domain needs low > 0")
        if not self.contains(self.default):
            raise ValueError(f"{self.name}: default {self.default!r} outside domain")

    @property
    def is_numeric(self) -> bool:
        return self.kind != CATEGORICAL

    def contains(self, value: Any) -> bool:
        if self.kind == CATEGORICAL:
            try:
                return value in self.choices
            except TypeError:
                return False
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        if not math.isfinite(value):
            return False
        if self.kind == INTEGER and not float(value).is_integer():
            return False
        return self.low <= value <= self.high

    def to_record(self) -> dict:
        record: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            record["choices"] = list(self.choices)
        else:
            record["bounds"] = [self.low, self.high]
        record["default"] = self.default
        return record

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "ParamDomain":
        kind = record["kind"]
        if kind == CATEGORICAL:
            return cls(record["name"], kind, record["default"], choices=tuple(record["choices"]))
        low, high = record["bounds"]
        return cls(record["name"], kind, record["default"], low=low, high=high)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered collection of uniquely named parameter domains."""

    params: tuple[ParamDomain, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        object.__setattr__(self, "_index", {p.name: p for p in self.params})

    def __iter__(self) -> Iterator[ParamDomain]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> ParamDomain:
        return self._index[name]

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def subspace(self, names: Sequence[str] | set[str]) -> "SearchSpace":
        """Restrict to ``names``, keeping this space's canonical order."""
        wanted = set(names)
        unknown = wanted - set(self._index)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        return SearchSpace(tuple(p for p in self.params if p.name in wanted))

    def to_records(self) -> list[dict]:
        return [p.to_record() for p in self.params]

    @classmethod
    def from_records(cls, records: Sequence[Mapping[str, Any]]) -> "SearchSpace":
        return cls(tuple(ParamDomain.from_record(r) for r in records))


@dataclass
class ValidationResult:
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok

    @property
    def offending(self) -> list[str]:
        return [name for name, _ in self.errors]


def sample_prior(domain: ParamDomain, rng: np.random.Generator) -> Any:
    """Draw one value from the domain's uniform prior.

    ``log_continuous`` domains are uniform in log10 space.
    """
    if domain.kind == CONTINUOUS:
        return float(rng.uniform(domain.low, domain.high))
    if domain.kind == LOG_CONTINUOUS:
        lo, hi = math.log10(domain.low), math.log10(domain.high)
        return float(min(max(10.0 ** rng.uniform(lo, hi), domain.low), domain.high))
    if domain.kind == INTEGER:
        return int(rng.integers(domain.low, domain.high + 1))
    return domain.choices[int(rng.integers(len(domain.choices)))]


def sample_config(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    return {p.name: sample_prior(p, rng) for p in space}


def default_config(space: SearchSpace) -> Configuration:
    return {p.name: p.default for p in space}


def validate(config: Mapping[str, Any], space: SearchSpace) -> ValidationResult:
    """Check ``config`` against ``space``, collecting every offending parameter."""
    result = ValidationResult()
    for p in space:
        if p.name not in config:
            result.errors.append((p.name, "missing"))
        elif not p.contains(config[p.name]):
            result.errors.append((p.name, f"value {config[p.name]!r} out of domain"))
    for name in config:
        if name not in space:
            result.errors.append((name, "unknown parameter"))
    return result


def check(config: Mapping[str, Any], space: SearchSpace) -> None:
    result = validate(config, space)
    if not result:
        raise InvalidConfiguration(result.errors)


def load_config_file(path: str | Path | None = None) -> dict:
    """Read a YAML experiment file; ``None`` reads the shipped CNN space file."""
    if path is None:
        text = resources.files("grouphpo.data").joinpath("cnn_space.yaml").read_text()
    else:
        text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return data


def load_space(path: str | Path | None = None) -> SearchSpace:
    data = load_config_file(path)
    if "params" not in data:
        raise ValueError(f"{path}: no 'params' section")
    return SearchSpace.from_records(data["params"])


def paper_search_space() -> SearchSpace:
    """The 10-parameter CNN search space with its default values."""
    return load_space(None)
