import math

import numpy as np
import pytest

from grouphpo.objectives import (
    CostModel,
    EvalResult,
    delayed_random_objective,
    grid_oracle,
    lattice_values,
    load_surrogate,
    simulate_clock,
    sphere,
    surrogate_cnn_objective,
)
from grouphpo.search_space import InvalidConfiguration, default_config, paper_search_space, sample_config
from grouphpo.tpe_core import Observation


@pytest.fixture(scope="module")
def surrogate():
    return load_surrogate()


@pytest.fixture(scope="module")
def oracle(surrogate):
    return grid_oracle(surrogate)


def test_sphere_examples():
    assert sphere([0, 0, 0]) == 0
    assert sphere([1, 2]) == 5
    assert sphere([-3]) == 9


def test_sphere_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-5, 5, size=rng.integers(1, 8))
        eps = 1e-5
        for i in range(len(x)):
            up, down = x.copy(), x.copy()
            up[i] += eps
            down[i] -= eps
            numeric = (sphere(up) - sphere(down)) / (2 * eps)
            assert numeric == pytest.approx(2 * x[i], rel=1e-6, abs=1e-8)


def test_delayed_random_sleeps():
    f = delayed_random_objective(1, 0.01, 0)
    for _ in range(3):
        res = f({"x1": 1.0})
        assert res.wall_eval_seconds >= 0.01
        assert res.simulated_eval_seconds == 0.01


def test_delayed_random_no_delay_and_determinism():
    f = delayed_random_objective(12, 0.0, 1)
    assert len(f.space) == 12 and f.space["x12"].high == 1e6
    values = [f({}).value for _ in range(100)]
    assert all(0 <= v < 1 for v in values)
    again = delayed_random_objective(12, 0.0, 1)
    assert values == [again({}).value for _ in range(100)]
    with pytest.raises(ValueError):
        delayed_random_objective(0)


def test_surrogate_default_is_deterministic():
    cfg = default_config(paper_search_space())
    a, b = surrogate_cnn_objective(cfg), surrogate_cnn_objective(cfg)
    assert (a.value, a.simulated_eval_seconds) == (b.value, b.simulated_eval_seconds)


def test_surrogate_bitwise_stable(surrogate):
    rng = np.random.default_rng(2)
    configs = [sample_config(surrogate.space, rng) for _ in range(1000)]
    first = [surrogate(c) for c in configs]
    second = [surrogate(c) for c in configs]
    for a, b in zip(first, second):
        assert a.value.hex() == b.value.hex()
        assert a.simulated_eval_seconds.hex() == b.simulated_eval_seconds.hex()


def test_surrogate_rejects_invalid(surrogate):
    cfg = default_config(surrogate.space)
    cfg["epoch"] = 1000
    with pytest.raises(InvalidConfiguration):
        surrogate(cfg)


def test_epoch_cost_example():
    cfg = default_config(paper_search_space())
    short, long_ = dict(cfg, epoch=10), dict(cfg, epoch=100)
    assert surrogate_cnn_objective(long_).simulated_eval_seconds > surrogate_cnn_objective(short).simulated_eval_seconds


def test_cost_monotonicity_pairs():
    space = paper_search_space()
    cost = CostModel()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        cfg = sample_config(space, rng)
        name = ["epoch", "num_conv_layers", "batch_size"][rng.integers(3)]
        other = dict(cfg, **{name: sample_config(space, rng)[name]})
        a, b = sorted([cfg, other], key=lambda c: c[name])
        ca, cb = cost.seconds(a), cost.seconds(b)
        assert ca > 0 and cb > 0
        if a[name] == b[name]:
            assert ca == cb
        elif name == "batch_size":
            assert cb <= ca
        else:
            assert cb > ca


def test_alternate_cost_model():
    cfg = default_config(paper_search_space())
    cheap = surrogate_cnn_objective(cfg, CostModel(base_seconds=1.0))
    # defaults: epoch 10, three conv layers (1.3x), batch 32
    assert cheap.simulated_eval_seconds == pytest.approx(1.3)
    assert cheap.value == surrogate_cnn_objective(cfg).value


def test_lattice_shape(surrogate):
    sizes = [len(lattice_values(p)) for p in surrogate.space]
    # stride has only two integers, so its lattice collapses to {1, 2}
    assert sizes == [3, 3, 3, 2, 3, 2, 2, 2, 3, 4]


def test_grid_oracle_matches_recorded_minimizer(surrogate, oracle):
    argmin, best = oracle
    assert abs(best - surrogate.minimum_loss) <= 1e-9
    assert abs(surrogate.loss(surrogate.minimizer) - surrogate.minimum_loss) <= 1e-9
    for name, value in surrogate.minimizer.items():
        if isinstance(value, float):
            assert argmin[name] == pytest.approx(value, rel=1e-12)
        else:
            assert argmin[name] == value


def test_random_configs_never_beat_oracle(surrogate, oracle):
    rng = np.random.default_rng(4)
    _, best = oracle
    assert all(surrogate.loss(sample_config(surrogate.space, rng)) >= best for _ in range(10_000))


def test_simulate_clock():
    assert simulate_clock([]) == 0
    assert simulate_clock([EvalResult(0.0, 1.5), EvalResult(0.0, 2.5)]) == 4.0
    assert simulate_clock([EvalResult(0.0, 0.01)] * 100) == pytest.approx(1.0, abs=1e-12)
    obs = [Observation({}, 0.0, i, tpe_seconds=0.5, simulated_eval_seconds=1.0) for i in range(2)]
    assert simulate_clock(obs) == 3.0
    assert simulate_clock([EvalResult(0.0, 1.0)], [0.25]) == 1.25


def test_eval_result_validation():
    with pytest.raises(ValueError):
        EvalResult(math.nan)
    with pytest.raises(ValueError):
        EvalResult(1.0, -1.0)
