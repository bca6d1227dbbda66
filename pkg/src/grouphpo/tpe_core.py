"""Tree-structured Parzen Estimator optimization loop.

The loop is: ``n_init`` prior samples, then repeatedly split the history at
the ``gamma`` quantile, fit per-parameter good/bad densities, draw candidates
from the good densities and keep the one with the largest ``l/g`` ratio.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from .density import DensityPair, KdeBlock, fit_categorical, uniform_estimator
from .search_space import Configuration, SearchSpace, sample_config

logger = logging.getLogger(__name__)

SIMULTANEOUS = "simultaneous"


@dataclass(frozen=True)
class EvalResult:
    """Outcome of one objective evaluation.

    ``simulated_eval_seconds`` is the modeled cost used by the virtual clock;
    ``wall_eval_seconds`` is what the call actually took.
    """

    value: float
    simulated_eval_seconds: float = 0.0
    wall_eval_seconds: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"objective value must be finite, got {self.value}")
        if self.simulated_eval_seconds < 0 or self.wall_eval_seconds < 0:
            raise ValueError("evaluation times must be non-negative")


Objective = Callable[[Configuration], Union[float, EvalResult]]


@dataclass(frozen=True)
class Observation:
    config: Configuration
    value: float
    iteration: int
    phase: Union[int, str] = SIMULTANEOUS
    eval_seconds: float = 0.0
    tpe_seconds: float = 0.0
    simulated_eval_seconds: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"observation value must be finite, got {self.value}")
        if self.eval_seconds < 0 or self.tpe_seconds < 0 or self.simulated_eval_seconds < 0:
            raise ValueError("observation times must be non-negative")


@dataclass(frozen=True)
class TpeSettings:
    n_init: int = 15
    gamma: float = 0.25
    n_candidates: int = 24
    max_iter: int = 100
    # width / min(100, n + 1) floor on numeric bandwidths; off = plain Scott's rule
    adaptive_bandwidth: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.n_init < 2:
            raise ValueError("n_init must be at least 2")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class SplitResult:
    good: list[Observation]
    bad: list[Observation]
    threshold: float


class OptimizationError(RuntimeError):
    """An objective evaluation failed; ``history`` holds what was completed."""

    def __init__(self, message: str, history: list[Observation]):
        super().__init__(message)
        self.history = history


def n_good(n: int, gamma: float) -> int:
    # round() guards against products like 0.1 * 30 = 3.0000000000000004
    return max(1, math.ceil(round(gamma * n, 9)))


def split_by_quantile(history: Sequence[Observation], gamma: float) -> SplitResult:
    """Split ``history`` into the best ``max(1, ceil(gamma * n))`` and the rest.

    The sort is stable, so among tied values earlier observations land in the
    good set and later ones may land in the bad set.
    """
    if not history:
        raise ValueError("cannot split an empty history")
    ordered = sorted(history, key=lambda obs: obs.value)
    k = n_good(len(ordered), gamma)
    return SplitResult(ordered[:k], ordered[k:], ordered[k - 1].value)


class DensityModel(Mapping[str, DensityPair]):
    """Good/bad estimators for every parameter of a space.

    Behaves as a read-only ``name -> DensityPair`` mapping. Numeric
    parameters are held as one :class:`KdeBlock` per set so candidates can be
    drawn and scored for all of them at once.
    """

    def __init__(
        self,
        space: SearchSpace,
        good: Sequence[Observation],
        bad: Sequence[Observation],
        adaptive_bandwidth: bool = True,
    ):
        if not good:
            raise ValueError("good set is empty")
        self.space = space
        self.numeric = [p for p in space if p.is_numeric]
        names = [p.name for p in self.numeric]
        self.good_block = self.bad_block = None
        if self.numeric:
            self.good_block = KdeBlock(_matrix(good, names), self.numeric, adaptive_bandwidth)
            if bad:
                self.bad_block = KdeBlock(_matrix(bad, names), self.numeric, adaptive_bandwidth)
            else:
                self._flat = np.array([uniform_estimator(p).log_pdf(0.0) for p in self.numeric])
        self._pairs: dict[str, DensityPair] = {}
        for p in space:
            if not p.is_numeric:
                self._pairs[p.name] = DensityPair(
                    fit_categorical([o.config[p.name] for o in good], p),
                    fit_categorical([o.config[p.name] for o in bad], p),
                )

    def __getitem__(self, name: str) -> DensityPair:
        if name not in self._pairs:
            j = next(j for j, p in enumerate(self.numeric) if p.name == name)
            bad = self.bad_block.column(j) if self.bad_block else uniform_estimator(self.numeric[j])
            self._pairs[name] = DensityPair(self.good_block.column(j), bad)
        return self._pairs[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.space.names)

    def __len__(self) -> int:
        return len(self.space)

    def draw(self, rng: np.random.Generator, n: int) -> list[dict]:
        """``n`` candidates sampled parameter-wise from the good estimators."""
        columns: dict[str, list] = {}
        if self.numeric:
            block = self.good_block.sample(rng, n)
            for j, p in enumerate(self.numeric):
                col = block[:, j]
                columns[p.name] = [int(v) for v in col] if p.kind == "integer" else col.tolist()
        for p in self.space:
            if not p.is_numeric:
                columns[p.name] = self._pairs[p.name].good.sample(rng, n)
        names = self.space.names
        return [{name: columns[name][i] for name in names} for i in range(n)]

    def log_ratio(self, configs: Sequence[Mapping[str, Any]]) -> np.ndarray:
        total = np.zeros(len(configs))
        if self.numeric:
            x = _matrix(configs, [p.name for p in self.numeric])
            bad = self.bad_block.log_pdf(x) if self.bad_block else self._flat
            total += (self.good_block.log_pdf(x) - bad).sum(axis=1)
        for p in self.space:
            if not p.is_numeric:
                total += self._pairs[p.name].log_ratio([c[p.name] for c in configs])
        return total


def _matrix(rows, names: Sequence[str]) -> np.ndarray:
    rows = [getattr(r, "config", r) for r in rows]
    return np.array([[r[n] for n in names] for r in rows], dtype=float).reshape(len(rows), len(names))


def build_density_model(
    split: SplitResult, space: SearchSpace, adaptive_bandwidth: bool = True
) -> DensityModel:
    """Fit one good/bad estimator pair per parameter.

    An empty bad set falls back to the flat prior over the domain.
    """
    return DensityModel(space, split.good, split.bad, adaptive_bandwidth)


def acquisition_score(l_val: float, g_val: float, gamma: float) -> float:
    """Expected-improvement score ``1 / (gamma + (g / l) * (1 - gamma))``."""
    if not (l_val > 0 and g_val > 0):
        raise ValueError(f"densities must be positive, got l={l_val}, g={g_val}")
    return 1.0 / (gamma + (g_val / l_val) * (1.0 - gamma))


def log_joint_ratio(configs: Sequence[Mapping[str, Any]] | Mapping[str, Any], model: Mapping[str, DensityPair]):
    """Sum over parameters of ``log l(h_j) - log g(h_j)``.

    Accepts one configuration or a sequence of them (vectorized per parameter).
    """
    if isinstance(configs, Mapping):
        if isinstance(model, DensityModel):
            return float(model.log_ratio([configs])[0])
        return float(sum(float(pair.log_ratio(configs[name])) for name, pair in model.items()))
    if isinstance(model, DensityModel):
        return model.log_ratio(configs)
    total = np.zeros(len(configs))
    for name, pair in model.items():
        total += pair.log_ratio([c[name] for c in configs])
    return total


def joint_ratio(config: Mapping[str, Any], model: Mapping[str, DensityPair]) -> float:
    """``prod_j l(h_j) / g(h_j)``, accumulated in log space."""
    return math.exp(log_joint_ratio(config, model))


def _draw_candidates(model: Mapping[str, DensityPair], space: SearchSpace, n: int, rng) -> list[dict]:
    if isinstance(model, DensityModel):
        return model.draw(rng, n)
    columns = {p.name: model[p.name].good.sample(rng, n) for p in space}
    return [{name: columns[name][i] for name in columns} for i in range(n)]


def propose(
    model: Mapping[str, DensityPair],
    space: SearchSpace,
    settings: TpeSettings,
    rng: np.random.Generator,
) -> Configuration:
    """Draw candidates from the good densities and return the best by ``l/g``.

    Ties go to the earliest-drawn candidate.
    """
    candidates = _draw_candidates(model, space, settings.n_candidates, rng)
    if len(candidates) == 1:
        return candidates[0]
    scores = log_joint_ratio(candidates, model)
    return candidates[int(np.argmax(scores))]


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def evaluate(objective: Objective, config: Configuration) -> tuple[EvalResult, float]:
    """Call ``objective`` and time it; plain floats carry no simulated cost."""
    start = time.perf_counter()
    out = objective(config)
    wall = time.perf_counter() - start
    if not isinstance(out, EvalResult):
        out = EvalResult(float(out), 0.0, wall)
    return out, wall


def optimize(
    objective: Objective,
    space: SearchSpace,
    settings: TpeSettings,
    rng=None,
    phase: Union[int, str] = SIMULTANEOUS,
) -> tuple[Observation, list[Observation]]:
    """Minimize ``objective`` over ``space`` for ``settings.max_iter`` evaluations.

    Args:
        objective: Maps a configuration to a loss or an :class:`EvalResult`.
        space: Parameters to search.
        settings: TPE settings; the first ``n_init`` iterations sample the prior.
        rng: ``numpy.random.Generator`` or seed.
        phase: Label stored on every observation.

    Returns:
        The best observation and the full history.

    Raises:
        OptimizationError: if the objective raises; carries the partial history.
    """
    if settings.max_iter < settings.n_init:
        raise ValueError("max_iter must be at least n_init")
    rng = _as_rng(rng)
    history: list[Observation] = []
    for it in range(settings.max_iter):
        if it < settings.n_init:
            config = sample_config(space, rng)
            tpe_seconds = 0.0
        else:
            start = time.perf_counter()
            split = split_by_quantile(history, settings.gamma)
            model = build_density_model(split, space, settings.adaptive_bandwidth)
            config = propose(model, space, settings, rng)
            tpe_seconds = time.perf_counter() - start
        try:
            result, wall = evaluate(objective, config)
        except Exception as exc:
            raise OptimizationError(
                f"objective failed at iteration {it}: {exc}", history
            ) from exc
        history.append(
            Observation(
                config=config,
                value=float(result.value),
                iteration=it,
                phase=phase,
                eval_seconds=wall,
                tpe_seconds=tpe_seconds,
                simulated_eval_seconds=result.simulated_eval_seconds,
            )
        )
    best = min(history, key=lambda obs: obs.value)
    logger.debug("tpe run finished: best %.6g after %d iterations", best.value, len(history))
    return best, history


def random_search(
    objective: Objective, space: SearchSpace, n_iter: int, rng=None
) -> tuple[Observation, list[Observation]]:
    """Baseline: ``n_iter`` independent prior samples."""
    rng = _as_rng(rng)
    history = []
    for it in range(n_iter):
        config = sample_config(space, rng)
        result, wall = evaluate(objective, config)
        history.append(
            Observation(config, float(result.value), it, "random", wall, 0.0, result.simulated_eval_seconds)
        )
    return min(history, key=lambda obs: obs.value), history


def with_budget(settings: TpeSettings, max_iter: int) -> TpeSettings:
    """Copy ``settings`` for a smaller budget, scaling the prior phase down."""
    n_init = min(settings.n_init, max(2, max_iter // 3))
    return replace(settings, max_iter=max_iter, n_init=n_init)
