"""Benchmark objectives: sphere, a delayed random loss, and a surrogate CNN.

The surrogate replaces real CNN training with a separable analytic loss over
the CNN search space plus a multiplicative evaluation-cost model, so the
time dynamics of grouped vs simultaneous search can be reproduced without a
GPU. Coefficients live in ``data/surrogate_cnn.yaml``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .search_space import (
    CATEGORICAL,
    INTEGER,
    LOG_CONTINUOUS,
    ParamDomain,
    SearchSpace,
    check,
    paper_search_space,
)
from .tpe_core import EvalResult, Observation

__all__ = [
    "EvalResult",
    "CostModel",
    "SurrogateCnn",
    "DelayedRandomObjective",
    "sphere",
    "sphere_space",
    "sphere_objective",
    "delayed_random_objective",
    "surrogate_cnn_objective",
    "load_surrogate",
    "grid_oracle",
    "simulate_clock",
]


def sphere(x: Sequence[float]) -> float:
    return float(sum(v * v for v in x))


def sphere_space(dim: int = 5, low: float = -5.0, high: float = 5.0) -> SearchSpace:
    """Continuous box ``[low, high]^dim`` with defaults at ``high / 2``."""
    return SearchSpace(
        tuple(ParamDomain(f"x{i}", "continuous", high / 2, low=low, high=high) for i in range(dim))
    )


def sphere_objective(config: Mapping[str, float]) -> float:
    return sphere(config.values())


class DelayedRandomObjective:
    """Random loss with a fixed per-call delay, over ``d`` parameters in ``[0, 1e6]``.

    The loss ignores its input; only the optimizer overhead is of interest.
    """

    def __init__(self, d: int, delay: float = 0.01, rng=None):
        if d < 1:
            raise ValueError("d must be at least 1")
        if delay < 0:
            raise ValueError("delay must be non-negative")
        self.d = d
        self.delay = delay
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.space = SearchSpace(
            tuple(ParamDomain(f"x{i + 1}", "continuous", 5e5, low=0.0, high=1e6) for i in range(d))
        )

    def __call__(self, config: Mapping[str, float]) -> EvalResult:
        start = time.perf_counter()
        if self.delay > 0:
            time.sleep(self.delay)
        value = float(self.rng.random())
        return EvalResult(value, self.delay, time.perf_counter() - start)


def delayed_random_objective(d: int, delay: float = 0.01, rng=None) -> DelayedRandomObjective:
    return DelayedRandomObjective(d, delay, rng)


@dataclass(frozen=True)
class CostModel:
    """Evaluation seconds ``base * (epoch / epoch_ref) * conv_factor * batch_factor``.

    ``conv_factor = 1 + conv_slope * (num_conv_layers - 2)`` and
    ``batch_factor = (32 / batch_size) ** batch_exponent``.
    """

    base_seconds: float = 30.0
    epoch_ref: float = 10.0
    conv_slope: float = 0.3
    batch_exponent: float = 0.25

    def __post_init__(self) -> None:
        if self.base_seconds <= 0 or self.epoch_ref <= 0:
            raise ValueError("base_seconds and epoch_ref must be positive")
        if self.conv_slope < 0 or self.batch_exponent < 0:
            raise ValueError("cost slopes must be non-negative")

    def seconds(self, config: Mapping[str, Any]) -> float:
        epoch = config["epoch"] / self.epoch_ref
        conv = 1.0 + self.conv_slope * (config["num_conv_layers"] - 2)
        batch = (32.0 / config["batch_size"]) ** self.batch_exponent
        return self.base_seconds * epoch * conv * batch


@dataclass(frozen=True)
class SurrogateCnn:
    """Deterministic analytic loss over the CNN search space.

    Numeric parameters contribute either a quadratic bowl
    ``scale * ((x - center) / half_width)**2`` (in log10 units for
    log-scaled parameters) or a saturating benefit
    ``scale * exp(-rate * t)`` where ``t`` is the position in ``[low, high]``
    mapped to ``[0, 1]``. Categorical parameters add a fixed offset per choice.
    """

    space: SearchSpace
    floor: float
    terms: Mapping[str, Mapping[str, Any]]
    cost: CostModel = field(default_factory=CostModel)
    minimizer: Mapping[str, Any] | None = None
    minimum_loss: float | None = None

    def __post_init__(self) -> None:
        missing = set(self.space.names) - set(self.terms)
        if missing:
            raise ValueError(f"surrogate has no term for {sorted(missing)}")
        for name, term in self.terms.items():
            shape = term["shape"]
            if shape not in ("bowl", "saturating", "offsets"):
                raise ValueError(f"{name}: unknown term shape {shape!r}")
            if (shape == "offsets") != (self.space[name].kind == CATEGORICAL):
                raise ValueError(f"{name}: offsets apply to categorical parameters only")

    def _term(self, p: ParamDomain, value: Any) -> float:
        term = self.terms[p.name]
        shape = term["shape"]
        if shape == "offsets":
            return float(term["offsets"][value])
        x = math.log10(value) if p.kind == LOG_CONTINUOUS else float(value)
        if shape == "bowl":
            return term["scale"] * ((x - term["center"]) / term["half_width"]) ** 2
        lo, hi = (math.log10(p.low), math.log10(p.high)) if p.kind == LOG_CONTINUOUS else (p.low, p.high)
        t = (x - lo) / (hi - lo)
        return term["scale"] * math.exp(-term["rate"] * t)

    def loss(self, config: Mapping[str, Any]) -> float:
        return self.floor + math.fsum(self._term(p, config[p.name]) for p in self.space)

    def __call__(self, config: Mapping[str, Any]) -> EvalResult:
        check(config, self.space)
        start = time.perf_counter()
        value = self.loss(config)
        return EvalResult(value, self.cost.seconds(config), time.perf_counter() - start)


def load_surrogate(path: str | Path | None = None, space: SearchSpace | None = None) -> SurrogateCnn:
    """Read surrogate coefficients; ``None`` reads the shipped canonical file."""
    if path is None:
        text = resources.files("grouphpo.data").joinpath("surrogate_cnn.yaml").read_text()
    else:
        text = Path(path).read_text()
    data = yaml.safe_load(text)
    return SurrogateCnn(
        space=space or paper_search_space(),
        floor=float(data["floor"]),
        terms=data["terms"],
        cost=CostModel(**data.get("cost", {})),
        minimizer=data.get("minimizer"),
        minimum_loss=data.get("minimum_loss"),
    )


def surrogate_cnn_objective(config: Mapping[str, Any], cost: CostModel | None = None) -> EvalResult:
    """Evaluate the canonical surrogate, optionally under a different cost model."""
    surrogate = _canonical_surrogate()
    if cost is not None and cost != surrogate.cost:
        surrogate = SurrogateCnn(surrogate.space, surrogate.floor, surrogate.terms, cost)
    return surrogate(config)


_CANONICAL: list[SurrogateCnn] = []


def _canonical_surrogate() -> SurrogateCnn:
    if not _CANONICAL:
        _CANONICAL.append(load_surrogate())
    return _CANONICAL[0]


def lattice_values(p: ParamDomain) -> list:
    """Three-point lattice (low, midpoint, high) per numeric parameter, all choices otherwise."""
    if p.kind == CATEGORICAL:
        return list(p.choices)
    if p.kind == LOG_CONTINUOUS:
        lo, hi = math.log10(p.low), math.log10(p.high)
        return [p.low, 10.0 ** ((lo + hi) / 2), p.high]
    if p.kind == INTEGER:
        return sorted({p.low, (p.low + p.high) // 2, p.high})
    return [p.low, (p.low + p.high) / 2, p.high]


def grid_oracle(surrogate: SurrogateCnn) -> tuple[dict, float]:
    """Brute-force the surrogate loss over the full lattice; returns (argmin, min).

    Enumerates with ``surrogate.loss`` directly, so it does not share any code
    with the optimizers it is used to judge.
    """
    names = surrogate.space.names
    axes = [lattice_values(p) for p in surrogate.space]
    best_cfg, best = None, math.inf
    for combo in itertools.product(*axes):
        cfg = dict(zip(names, combo))
        value = surrogate.loss(cfg)
        if value < best:
            best_cfg, best = cfg, value
    return best_cfg, best


def simulate_clock(
    results: Iterable[EvalResult | Observation], tpe_seconds: Iterable[float] = ()
) -> float:
    """Virtual elapsed seconds: modeled evaluation time plus optimizer time.

    Observations contribute their own ``tpe_seconds``; for bare
    :class:`EvalResult` items the optimizer time comes from ``tpe_seconds``.
    """
    total = []
    for r in results:
        total.append(r.simulated_eval_seconds)
        if isinstance(r, Observation):
            total.append(r.tpe_seconds)
    total.extend(tpe_seconds)
    return math.fsum(total)
