"""Experiment runner for grouped-sequential vs simultaneous TPE.

Time metrics use the virtual clock: per iteration, modeled evaluation
seconds plus measured optimizer seconds. Only :func:`timing_study` reports
pure wall-clock optimizer time.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .gsos import ImportanceTable, build_group_plan, gsos_optimize, load_group_plan
from .objectives import DelayedRandomObjective, load_surrogate, sphere_objective, sphere_space
from .search_space import SearchSpace, default_config
from .tpe_core import EvalResult, Observation, OptimizationError, TpeSettings, optimize

logger = logging.getLogger(__name__)

GROUPED = "grouped_sequential"
SIMULTANEOUS = "simultaneous"
STRATEGIES = (GROUPED, SIMULTANEOUS)

ITERATION_FIELDS = ("strategy", "objective", "round", "seed", "iteration", "phase")
ITERATION_TAIL = ("value", "simulated_eval_seconds", "tpe_seconds", "running_best")
# columns holding measured wall-clock time; excluded from byte-equality checks
WALL_CLOCK_COLUMNS = ("tpe_seconds",)


@dataclass(frozen=True)
class ObjectiveSetup:
    space: SearchSpace
    make: Callable[[int], Callable]
    plan: Callable[[int], Any]


def _unit_cost(config) -> EvalResult:
    return EvalResult(sphere_objective(config), 1.0)


def _ranked_plan(space: SearchSpace) -> Callable[[int], Any]:
    # no importance data: earlier parameters rank higher
    table = ImportanceTable({n: float(len(space) - i) for i, n in enumerate(space.names)})
    return lambda iters: build_group_plan(table, space, min(3, len(space)), iters, [4, 3, 3][: min(3, len(space))])


def _surrogate_setup() -> ObjectiveSetup:
    surrogate = load_surrogate()
    return ObjectiveSetup(
        surrogate.space,
        lambda seed: surrogate,
        lambda iters: load_group_plan(None, surrogate.space, iters),
    )


def _sphere_setup() -> ObjectiveSetup:
    space = sphere_space(5)
    return ObjectiveSetup(space, lambda seed: _unit_cost, _ranked_plan(space))


def _random_setup() -> ObjectiveSetup:
    space = DelayedRandomObjective(10, 0.0).space
    return ObjectiveSetup(
        space,
        lambda seed: DelayedRandomObjective(10, 0.01, np.random.default_rng([seed, 1])),
        _ranked_plan(space),
    )


OBJECTIVES: dict[str, Callable[[], ObjectiveSetup]] = {
    "surrogate_cnn": _surrogate_setup,
    "sphere": _sphere_setup,
    "delayed_random": _random_setup,
}


def get_objective(objective_id: str) -> ObjectiveSetup:
    try:
        return OBJECTIVES[objective_id]()
    except KeyError:
        raise ValueError(
            f"unknown objective {objective_id!r}; choose from {sorted(OBJECTIVES)}"
        ) from None


def virtual_seconds(obs: Observation) -> float:
    return obs.simulated_eval_seconds + obs.tpe_seconds


@dataclass
class RunRecord:
    strategy: str
    objective_id: str
    round: int
    seed: int
    history: list[Observation]
    best: Observation = field(init=False)
    time_to_best_seconds: float = field(init=False)
    total_time_seconds: float = field(init=False)
    best_iteration: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.history:
            raise ValueError("a run record needs a non-empty history")
        values = [obs.value for obs in self.history]
        self.best_iteration = int(np.argmin(values))
        self.best = self.history[self.best_iteration]
        elapsed = np.cumsum([virtual_seconds(obs) for obs in self.history])
        self.time_to_best_seconds = float(elapsed[self.best_iteration])
        self.total_time_seconds = float(elapsed[-1])

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "objective": self.objective_id,
            "round": self.round,
            "seed": self.seed,
            "iterations": len(self.history),
            "best_iteration": self.best_iteration,
            "best_value": self.best.value,
            "best_config": self.best.config,
            "time_to_best_seconds": self.time_to_best_seconds,
            "total_time_seconds": self.total_time_seconds,
        }


def run_experiment(
    strategy: str,
    objective_id: str,
    rounds: int = 5,
    iters: int = 100,
    base_seed: int = 0,
    settings: TpeSettings | None = None,
) -> list[RunRecord]:
    """Run ``rounds`` independent optimizations with seeds ``base_seed + round``.

    ``grouped_sequential`` splits ``iters`` over the objective's group plan
    (4:3:3 by default); ``simultaneous`` spends all of it on one TPE run.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if rounds < 1:
        raise ValueError("rounds must be positive")
    if iters < 10:
        raise ValueError("iters must be at least 10")
    setup = get_objective(objective_id)
    settings = settings or TpeSettings()
    records = []
    for r in range(rounds):
        seed = base_seed + r
        rng = np.random.default_rng(seed)
        objective = setup.make(seed)
        try:
            if strategy == GROUPED:
                _, history = gsos_optimize(
                    objective, setup.space, setup.plan(iters), default_config(setup.space), settings, rng
                )
            else:
                _, history = optimize(
                    objective, setup.space, dataclasses.replace(settings, max_iter=iters), rng
                )
        except OptimizationError as exc:
            raise OptimizationError(f"round {r} (seed {seed}): {exc}", exc.history) from exc
        records.append(RunRecord(strategy, objective_id, r, seed, history))
        logger.info("%s %s round %d: best %.6g", strategy, objective_id, r, records[-1].best.value)
    return records


@dataclass(frozen=True)
class StrategyAverages:
    runs: int
    time_to_best_seconds: float
    total_time_seconds: float
    best_value: float


@dataclass(frozen=True)
class ComparisonSummary:
    objective_id: str
    grouped: StrategyAverages
    simultaneous: StrategyAverages
    time_reduction_percent: float
    time_to_best_reduction_percent: float
    value_change: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _reduction(new: float, old: float) -> float:
    return 100.0 * (1.0 - new / old) if old > 0 else math.nan


def _averages(records: Sequence[RunRecord]) -> StrategyAverages:
    return StrategyAverages(
        len(records),
        float(np.mean([r.time_to_best_seconds for r in records])),
        float(np.mean([r.total_time_seconds for r in records])),
        float(np.mean([r.best.value for r in records])),
    )


def summarize(grouped: Sequence[RunRecord], simultaneous: Sequence[RunRecord]) -> ComparisonSummary:
    """Per-strategy averages plus the grouped-vs-simultaneous deltas.

    ``value_change`` is grouped minus simultaneous average best loss, so a
    negative number means grouped found better configurations.
    """
    if not grouped or not simultaneous:
        raise ValueError("summarize needs records for both strategies")
    g, s = _averages(grouped), _averages(simultaneous)
    return ComparisonSummary(
        objective_id=grouped[0].objective_id,
        grouped=g,
        simultaneous=s,
        time_reduction_percent=_reduction(g.total_time_seconds, s.total_time_seconds),
        time_to_best_reduction_percent=_reduction(g.time_to_best_seconds, s.time_to_best_seconds),
        value_change=g.best_value - s.best_value,
    )


def compare(
    objective_id: str, rounds: int = 5, iters: int = 100, base_seed: int = 0, settings=None
) -> tuple[list[RunRecord], list[RunRecord], ComparisonSummary]:
    grouped = run_experiment(GROUPED, objective_id, rounds, iters, base_seed, settings)
    simultaneous = run_experiment(SIMULTANEOUS, objective_id, rounds, iters, base_seed, settings)
    return grouped, simultaneous, summarize(grouped, simultaneous)


@dataclass(frozen=True)
class TimingRow:
    d: int
    t_tpe_seconds: float
    t_eval_seconds: float
    iterations: int


def timing_study(
    d_values: Sequence[int],
    iters: int = 100,
    delay: float = 0.01,
    seed: int = 0,
    settings: TpeSettings | None = None,
) -> list[TimingRow]:
    """Wall-clock optimizer overhead vs. number of hyperparameters.

    For each ``d``, runs simultaneous TPE on the delayed random objective and
    sums the measured suggestion time (evaluation time excluded).
    """
    if not d_values:
        raise ValueError("d_values must be non-empty")
    settings = settings or TpeSettings()
    settings = dataclasses.replace(settings, max_iter=iters, n_init=min(settings.n_init, iters))
    rows = []
    for d in d_values:
        objective = DelayedRandomObjective(d, delay, np.random.default_rng([seed, d, 1]))
        _, history = optimize(objective, objective.space, settings, np.random.default_rng([seed, d]))
        rows.append(
            TimingRow(
                d,
                math.fsum(obs.tpe_seconds for obs in history),
                math.fsum(obs.eval_seconds for obs in history),
                len(history),
            )
        )
        logger.info("timing d=%d: t_tpe=%.4fs", d, rows[-1].t_tpe_seconds)
    return rows


def scatter_data(records: Sequence[RunRecord]) -> list[dict]:
    """Raw (iteration, value) points per strategy and round, for external plotting."""
    if not records:
        raise ValueError("no records")
    return [
        {"strategy": rec.strategy, "round": rec.round, "iteration": obs.iteration, "value": obs.value}
        for rec in records
        for obs in rec.history
    ]


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    return str(value)


def _param_columns(records: Sequence[RunRecord]) -> list[str]:
    names: dict[str, None] = {}
    for rec in records:
        for obs in rec.history:
            names.update(dict.fromkeys(obs.config))
    return list(names)


def iteration_rows(records: Sequence[RunRecord]) -> tuple[list[str], list[list[str]]]:
    params = _param_columns(records)
    header = [*ITERATION_FIELDS, *params, *ITERATION_TAIL]
    rows = []
    for rec in sorted(records, key=lambda r: (r.strategy, r.round)):
        running = math.inf
        for obs in rec.history:
            running = min(running, obs.value)
            rows.append(
                [
                    rec.strategy,
                    rec.objective_id,
                    fmt(rec.round),
                    fmt(rec.seed),
                    fmt(obs.iteration),
                    fmt(obs.phase),
                    *(fmt(obs.config.get(p, "")) for p in params),
                    fmt(obs.value),
                    fmt(obs.simulated_eval_seconds),
                    fmt(obs.tpe_seconds),
                    fmt(running),
                ]
            )
    return header, rows


SUMMARY_HEADER = (
    "objective",
    "strategy",
    "runs",
    "avg_time_to_best_seconds",
    "avg_total_time_seconds",
    "avg_best_value",
    "time_reduction_percent",
    "time_to_best_reduction_percent",
    "value_change",
)


def summary_rows(summary: ComparisonSummary) -> tuple[list[str], list[list[str]]]:
    rows = []
    for name, avg in ((GROUPED, summary.grouped), (SIMULTANEOUS, summary.simultaneous)):
        deltas = (
            [summary.time_reduction_percent, summary.time_to_best_reduction_percent, summary.value_change]
            if name == GROUPED
            else ["", "", ""]
        )
        rows.append(
            [
                summary.objective_id,
                name,
                fmt(avg.runs),
                fmt(avg.time_to_best_seconds),
                fmt(avg.total_time_seconds),
                fmt(avg.best_value),
                *(fmt(v) for v in deltas),
            ]
        )
    return list(SUMMARY_HEADER), rows


def timing_rows(table: Sequence[TimingRow]) -> tuple[list[str], list[list[str]]]:
    header = ["d", "t_tpe_seconds", "t_eval_seconds", "iterations"]
    return header, [[fmt(r.d), fmt(r.t_tpe_seconds), fmt(r.t_eval_seconds), fmt(r.iterations)] for r in table]


def scatter_rows(records: Sequence[RunRecord]) -> tuple[list[str], list[list[str]]]:
    header = ["strategy", "round", "iteration", "value"]
    points = scatter_data(records) if records else []
    return header, [[p["strategy"], fmt(p["round"]), fmt(p["iteration"]), fmt(p["value"])] for p in points]


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def export_csv(obj, path: str | Path) -> Path:
    """Write run records, a comparison summary or a timing table as CSV.

    A list of :class:`RunRecord` (possibly empty) gives the per-iteration
    table; floats carry 10 significant digits.
    """
    if isinstance(obj, ComparisonSummary):
        return write_csv(path, *summary_rows(obj))
    items = list(obj)
    if items and isinstance(items[0], TimingRow):
        return write_csv(path, *timing_rows(items))
    if all(isinstance(i, RunRecord) for i in items):
        return write_csv(path, *iteration_rows(items))
    raise TypeError(f"cannot export {type(obj).__name__} as CSV")


def export_json(obj, path: str | Path) -> Path:
    if isinstance(obj, ComparisonSummary):
        payload = obj.to_dict()
    elif isinstance(obj, list) and all(isinstance(i, RunRecord) for i in obj):
        payload = [r.summary() for r in obj]
    else:
        payload = [dataclasses.asdict(i) for i in obj]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")
