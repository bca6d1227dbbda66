"""Grouped sequential optimization.

Parameters are ranked by importance and cut into groups. Each group is tuned
with TPE while every other parameter stays frozen at the current best
configuration; the group's winner is written back before the next group runs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .search_space import Configuration, SearchSpace, check, load_config_file
from .tpe_core import Objective, Observation, OptimizationError, TpeSettings, optimize, with_budget

logger = logging.getLogger(__name__)

CNN_CUTS = (3, 6)
DEFAULT_RATIOS = (4, 3, 3)


@dataclass(frozen=True)
class ImportanceTable:
    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        for name, w in self.weights.items():
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"importance of {name} must be finite and >= 0, got {w}")

    def __getitem__(self, name: str) -> float:
        return self.weights[name]

    def ranked(self, space: SearchSpace) -> list[str]:
        """Space parameters by descending weight; ties keep space order."""
        missing = [n for n in space.names if n not in self.weights]
        if missing:
            raise ValueError(f"no importance weight for {missing}")
        return sorted(space.names, key=lambda n: -self.weights[n])


@dataclass(frozen=True)
class GroupPlan:
    groups: tuple[tuple[str, ...], ...]
    budgets: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        if len(self.groups) != len(self.budgets):
            raise ValueError("one budget per group required")
        if any(b < 2 for b in self.budgets):
            raise ValueError(f"every group budget must be >= 2, got {self.budgets}")
        seen: set[str] = set()
        for g in self.groups:
            if not g:
                raise ValueError("empty group")
            overlap = seen.intersection(g)
            if overlap:
                raise ValueError(f"parameters {sorted(overlap)} appear in more than one group")
            seen.update(g)

    @property
    def total_iters(self) -> int:
        return sum(self.budgets)

    def check_covers(self, space: SearchSpace) -> None:
        members = {n for g in self.groups for n in g}
        if members != set(space.names):
            raise ValueError(
                f"group plan does not partition the space: missing {sorted(set(space.names) - members)}, "
                f"unknown {sorted(members - set(space.names))}"
            )


def load_importance(path: str | Path | None = None) -> ImportanceTable:
    data = load_config_file(path)
    if "importance" not in data:
        raise ValueError(f"{path}: no 'importance' section")
    return ImportanceTable({k: float(v) for k, v in data["importance"].items()})


def paper_importance_table() -> ImportanceTable:
    """Published CNN importance weights (six of them placeholders, see data file)."""
    return load_importance(None)


def split_budget(total_iters: int, ratios: Sequence[float]) -> list[int]:
    """``floor(total * r / sum(r))`` per group, remainder to the last group."""
    if not ratios or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {list(ratios)}")
    denom = math.fsum(ratios)
    budgets = [math.floor(total_iters * r / denom) for r in ratios[:-1]]
    budgets.append(total_iters - sum(budgets))
    return budgets


def _default_cuts(n_params: int, k: int) -> list[int]:
    if k == 3 and n_params == 10:
        return list(CNN_CUTS)
    sizes = [len(a) for a in np.array_split(np.arange(n_params), k)]
    return list(np.cumsum(sizes)[:-1].astype(int))


def build_group_plan(
    table: ImportanceTable,
    space: SearchSpace,
    k: int = 3,
    total_iters: int = 100,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    cuts: Sequence[int] | None = None,
) -> GroupPlan:
    """Rank parameters by importance and cut them into ``k`` contiguous groups.

    Args:
        table: Importance weights covering every parameter of ``space``.
        space: Search space to partition.
        k: Number of groups.
        total_iters: Iterations shared across groups.
        ratios: Relative budget per group.
        cuts: ``k - 1`` increasing cut positions in the ranked list. Defaults
            to ``(3, 6)`` for a 10-parameter, 3-group plan and to near-equal
            group sizes otherwise.
    """
    n = len(space)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if len(ratios) != k:
        raise ValueError(f"expected {k} ratios, got {len(ratios)}")
    cuts = list(_default_cuts(n, k) if cuts is None else cuts)
    if len(cuts) != k - 1 or any(not 0 < c < n for c in cuts) or cuts != sorted(set(cuts)):
        raise ValueError(f"cut points {cuts} invalid for {n} parameters and {k} groups")
    ranked = table.ranked(space)
    bounds = [0, *cuts, n]
    groups = tuple(tuple(ranked[a:b]) for a, b in zip(bounds, bounds[1:]))
    plan = GroupPlan(groups, tuple(split_budget(total_iters, ratios)))
    plan.check_covers(space)
    return plan


def load_group_plan(
    path: str | Path | None, space: SearchSpace, total_iters: int = 100
) -> GroupPlan:
    """Plan from a config file's ``importance`` and ``groups`` sections.

    ``groups`` may give ``cuts`` (into the importance ranking) or explicit
    ``members`` lists, plus ``ratios``.
    """
    data = load_config_file(path)
    section = data.get("groups", {})
    ratios = section.get("ratios", list(DEFAULT_RATIOS))
    if "members" in section:
        plan = GroupPlan(tuple(tuple(g) for g in section["members"]), tuple(split_budget(total_iters, ratios)))
        plan.check_covers(space)
        return plan
    return build_group_plan(
        load_importance(path), space, len(ratios), total_iters, ratios, section.get("cuts")
    )


class RestrictedObjective:
    """``f`` seen through a group: assignments are merged over a frozen configuration."""

    def __init__(self, f: Objective, frozen: Mapping[str, Any], group: Sequence[str] | set[str]):
        self.f = f
        self.frozen = dict(frozen)
        self.group = frozenset(group)

    def merge(self, assignment: Mapping[str, Any]) -> Configuration:
        stray = set(assignment) - self.group
        if stray:
            raise ValueError(f"parameters {sorted(stray)} are outside the active group")
        return {**self.frozen, **assignment}

    def __call__(self, assignment: Mapping[str, Any]):
        return self.f(self.merge(assignment))


def restrict_objective(
    f: Objective, frozen: Mapping[str, Any], group: Sequence[str] | set[str]
) -> RestrictedObjective:
    return RestrictedObjective(f, frozen, group)


def gsos_optimize(
    f: Objective,
    space: SearchSpace,
    plan: GroupPlan,
    defaults: Mapping[str, Any],
    settings: TpeSettings | None = None,
    rng=None,
) -> tuple[Configuration, list[Observation]]:
    """Tune each group of ``plan`` in turn, threading winners forward.

    Group ``k`` runs TPE for ``plan.budgets[k]`` iterations with
    ``n_init = min(settings.n_init, max(2, budget // 3))``. Returned
    observations hold full configurations, a global iteration index and
    ``phase = k + 1``.

    Raises:
        OptimizationError: if the objective fails; the partial history covers
            all completed iterations across groups.
    """
    settings = settings or TpeSettings()
    plan.check_covers(space)
    check(defaults, space)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    current = dict(defaults)
    history: list[Observation] = []
    for k, (group, budget) in enumerate(zip(plan.groups, plan.budgets)):
        restricted = restrict_objective(f, current, group)
        try:
            best, phase_history = optimize(
                restricted, space.subspace(group), with_budget(settings, budget), rng, phase=k + 1
            )
        except OptimizationError as exc:
            history.extend(_lift(exc.history, restricted, len(history)))
            raise OptimizationError(f"group {k + 1}: {exc}", history) from exc
        history.extend(_lift(phase_history, restricted, len(history)))
        current.update(best.config)
        logger.info("group %d %s: best %.6g", k + 1, list(group), best.value)
    return current, history


def _lift(observations, restricted: RestrictedObjective, offset: int) -> list[Observation]:
    return [
        Observation(
            config=restricted.merge(obs.config),
            value=obs.value,
            iteration=offset + obs.iteration,
            phase=obs.phase,
            eval_seconds=obs.eval_seconds,
            tpe_seconds=obs.tpe_seconds,
            simulated_eval_seconds=obs.simulated_eval_seconds,
        )
        for obs in observations
    ]
