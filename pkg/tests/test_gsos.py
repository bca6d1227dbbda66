import math

import numpy as np
import pytest

from grouphpo.gsos import (
    GroupPlan,
    ImportanceTable,
    build_group_plan,
    gsos_optimize,
    load_group_plan,
    paper_importance_table,
    restrict_objective,
    split_budget,
)
from grouphpo.objectives import sphere_objective, sphere_space
from grouphpo.search_space import ParamDomain, SearchSpace, default_config, paper_search_space
from grouphpo.tpe_core import OptimizationError, TpeSettings, optimize


@pytest.fixture(scope="module")
def space():
    return paper_search_space()


def unit_scale(p, v):
    if p.kind == "log_continuous":
        return (math.log10(v) - math.log10(p.low)) / (math.log10(p.high) - math.log10(p.low))
    return (v - p.low) / (p.high - p.low)


def test_importance_weights():
    table = paper_importance_table()
    assert table["num_conv_layers"] == 0.385
    assert table["lr"] == 0.228
    assert table["dropout_rate"] == 0.131
    assert table["batch_size"] == 0.015
    middle = [table[n] for n in ("optimizer", "epoch", "stride", "padding", "kernel", "num_fc_units")]
    assert all(0.131 > a > b > 0.015 for a, b in zip(middle, middle[1:] + [0.0151]))


def test_cnn_group_plan(space):
    plan = build_group_plan(paper_importance_table(), space, 3, 100, [4, 3, 3])
    assert plan.budgets == (40, 30, 30)
    assert set(plan.groups[0]) == {"num_conv_layers", "lr", "dropout_rate"}
    assert [len(g) for g in plan.groups] == [3, 3, 4]
    assert load_group_plan(None, space, 100) == plan


def test_budget_rounding(space):
    plan = build_group_plan(paper_importance_table(), space, 3, 101, [4, 3, 3])
    assert plan.budgets == (40, 30, 31)
    assert split_budget(7, [1, 1, 1]) == [2, 2, 3]
    with pytest.raises(ValueError):
        split_budget(100, [4, 0, 3])


def test_single_group_plan(space):
    plan = build_group_plan(paper_importance_table(), space, 1, 100, [1])
    assert plan.budgets == (100,) and set(plan.groups[0]) == set(space.names)


@pytest.mark.parametrize("cuts", [[0, 6], [3, 10], [6, 3], [3]])
def test_bad_cuts(space, cuts):
    with pytest.raises(ValueError):
        build_group_plan(paper_importance_table(), space, 3, 100, [4, 3, 3], cuts)


def test_plan_partition_checks(space):
    with pytest.raises(ValueError):
        GroupPlan((("lr",), ("lr", "epoch")), (10, 10))
    with pytest.raises(ValueError):
        GroupPlan((("lr",),), (1,))
    with pytest.raises(ValueError):
        GroupPlan((("lr",),), (10,)).check_covers(space)


def test_ranking_ties_keep_space_order(space):
    table = ImportanceTable(dict.fromkeys(space.names, 1.0))
    assert table.ranked(space) == space.names


def test_restrict_objective(space):
    defaults = default_config(space)
    f = lambda c: c["lr"]  # noqa: E731
    assert restrict_objective(f, defaults, set())({}) == f(defaults)
    assert restrict_objective(f, defaults, {"dropout_rate"})({"dropout_rate": 0.5}) == 0.01
    total = lambda c: sum(c.values())  # noqa: E731
    assert restrict_objective(total, {"a": 0, "b": 0, "c": 0}, {"a"})({"a": 2}) == 2
    with pytest.raises(ValueError):
        restrict_objective(f, defaults, {"dropout_rate"})({"lr": 0.1})


def test_single_group_reduces_to_simultaneous():
    space = sphere_space(5)
    plan = GroupPlan((tuple(space.names),), (100,))
    x, history = gsos_optimize(sphere_objective, space, plan, default_config(space), rng=3)
    _, plain = optimize(sphere_objective, space, TpeSettings(max_iter=100), np.random.default_rng(3))
    assert [o.config for o in history] == [o.config for o in plain]
    assert [o.value for o in history] == [o.value for o in plain]
    assert x == min(plain, key=lambda o: o.value).config


def check_structure(plan, defaults, history):
    """Freezing, threading and budget accounting over a recorded GSOS history."""
    current = dict(defaults)
    start = 0
    for k, (group, budget) in enumerate(zip(plan.groups, plan.budgets), start=1):
        phase = history[start : start + budget]
        assert len(phase) == budget and all(o.phase == k for o in phase)
        assert sum(o.phase == k for o in history) == budget
        for o in phase:
            for name, value in current.items():
                if name not in group:
                    assert o.config[name] == value, (k, name)
        best = min(phase, key=lambda o: o.value)
        current.update({n: best.config[n] for n in group})
        start += budget
    assert start == len(history) == plan.total_iters
    assert [o.iteration for o in history] == list(range(len(history)))
    return current


def test_structure_invariants_hold(space):
    plan = load_group_plan(None, space, 100)
    f = lambda c: (math.log10(c["lr"]) + 3) ** 2 + c["dropout_rate"] + c["epoch"] / 100  # noqa: E731
    x, history = gsos_optimize(f, space, plan, default_config(space), rng=4)
    assert check_structure(plan, default_config(space), history) == x


def test_determinism(space):
    plan = load_group_plan(None, space, 60)
    f = lambda c: c["dropout_rate"] + c["num_conv_layers"]  # noqa: E731
    a = gsos_optimize(f, space, plan, default_config(space), rng=5)
    b = gsos_optimize(f, space, plan, default_config(space), rng=5)
    assert a[0] == b[0]
    assert [(o.config, o.value) for o in a[1]] == [(o.config, o.value) for o in b[1]]


def test_failure_history_spans_groups(space):
    plan = load_group_plan(None, space, 100)
    calls = {"n": 0}

    def flaky(c):
        calls["n"] += 1
        if calls["n"] == 45:
            raise RuntimeError("disk full")
        return c["dropout_rate"]

    with pytest.raises(OptimizationError) as err:
        gsos_optimize(flaky, space, plan, default_config(space), rng=6)
    assert len(err.value.history) == 44
    assert {o.phase for o in err.value.history} == {1, 2}


def test_recovers_separable_quadratic(space):
    # categoricals carry no term: a quadratic is only defined on the numeric axes
    target = {"num_conv_layers": 4, "lr": 1e-3, "dropout_rate": 0.3, "epoch": 60,
              "stride": 2, "num_fc_units": 200}
    numeric = [p for p in space if p.is_numeric]

    def f(c):
        return sum((unit_scale(p, c[p.name]) - unit_scale(p, target[p.name])) ** 2 for p in numeric)

    plan = load_group_plan(None, space, 100)
    hits = 0
    for seed in range(20):
        x, _ = gsos_optimize(f, space, plan, default_config(space), rng=seed)
        hits += all(abs(unit_scale(p, x[p.name]) - unit_scale(p, target[p.name])) <= 0.2 for p in numeric)
    assert hits >= 16


def test_categorical_groups_find_their_choice():
    space = SearchSpace(
        tuple(ParamDomain(f"c{i}", "categorical", "a", choices=("a", "b", "c", "d")) for i in range(4))
    )
    plan = GroupPlan((("c0", "c1"), ("c2", "c3")), (30, 30))
    f = lambda c: sum(v != "c" for v in c.values())  # noqa: E731
    wins = sum(
        gsos_optimize(f, space, plan, default_config(space), rng=s)[0] == dict.fromkeys(space.names, "c")
        for s in range(10)
    )
    assert wins >= 8
