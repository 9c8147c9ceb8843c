import math

import numpy as np
import pytest

from app.core.config import Config
from app.core.exceptions import ContractError, TrainingError
from app.models import LinearConfig, LinearModel
from app.services.training import (ArrayDataset, TrainConfig, apply_hyperparameters, derive_seed,
                                   early_stop_check, evaluate_loss, grid_points, grid_search,
                                   grid_space_from_config, train)


def linear_problem(seed=0, n=240, d=5):
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=(d, 24)) / math.sqrt(d)
    bias = rng.normal(size=24) * 0.1
    x = rng.normal(size=(n, d))
    data = ArrayDataset(x, x @ weights + bias)
    return data.take(range(0, 200)), data.take(range(200, n))


def test_zero_epochs_returns_the_initial_model():
    train_set, val_set = linear_problem()
    model = LinearModel(LinearConfig(5), seed=1)
    before = model.state_dict()
    trained, history = train(model, train_set, val_set, TrainConfig(max_epochs=0))
    assert trained is model and len(history) == 0 and history.best_epoch is None
    for name, array in before.items():
        np.testing.assert_array_equal(trained.state_dict()[name], array)


def test_linear_model_fits_linear_data():
    train_set, val_set = linear_problem()
    config = TrainConfig(batch_size=32, learning_rate=0.05, max_epochs=300, patience=30, seed=2)
    model, history = train(LinearModel(LinearConfig(5)), train_set, val_set, config)
    assert history.best_val_loss <= 1e-3
    assert evaluate_loss(model, val_set) == pytest.approx(history.best_val_loss, rel=1e-12)
    assert history.val_loss[history.best_epoch - 1] == min(history.val_loss)


def test_training_is_deterministic():
    train_set, val_set = linear_problem()
    config = TrainConfig(batch_size=16, learning_rate=0.01, max_epochs=5, seed=7)
    first, h1 = train(LinearModel(LinearConfig(5), seed=3), train_set, val_set, config)
    second, h2 = train(LinearModel(LinearConfig(5), seed=3), train_set, val_set, config)
    assert h1.rows() == h2.rows()
    assert first.state_dict()["dense_w"].tobytes() == second.state_dict()["dense_w"].tobytes()


def test_early_stopping_keeps_best_epoch():
    train_set, val_set = linear_problem()
    # validation targets from a different map: training soon stops helping
    val_set = ArrayDataset(val_set.features, -val_set.target)
    model, history = train(LinearModel(LinearConfig(5)), train_set, val_set,
                           TrainConfig(batch_size=32, learning_rate=0.05, max_epochs=200, patience=3))
    assert len(history) < 200
    assert len(history) - history.best_epoch == 3
    assert evaluate_loss(model, val_set) == pytest.approx(history.best_val_loss, rel=1e-12)


def test_divergence_raises_training_error():
    train_set, val_set = linear_problem()
    target = train_set.target.copy()
    target[0, 0] = np.nan
    with pytest.raises(TrainingError) as info:
        train(LinearModel(LinearConfig(5)), ArrayDataset(train_set.features, target), val_set,
              TrainConfig(max_epochs=3))
    assert info.value.last_finite_epoch == 0


def test_empty_split_is_rejected():
    train_set, val_set = linear_problem()
    with pytest.raises(ContractError):
        train(LinearModel(LinearConfig(5)), train_set.take([]), val_set, TrainConfig())


@pytest.mark.parametrize("losses,patience,expected", [
    ([1.0, 0.9, 0.8], 2, False),
    ([1.0, 1.0, 1.0], 2, True),
    ([1.0, 0.5, 0.6, 0.7], 2, True),
    ([1.0, 0.5, 0.6, 0.4], 2, False),
    ([1.0, 1.0 - 1e-12, 1.0 - 2e-12], 2, True),
])
def test_early_stop_check(losses, patience, expected):
    assert early_stop_check(losses, patience) is expected


def test_early_stop_check_needs_history():
    with pytest.raises(ContractError):
        early_stop_check([], 3)


@pytest.mark.parametrize("kwargs", [{"batch_size": 0}, {"patience": 0}, {"max_epochs": -1},
                                    {"learning_rate": 0.0}])
def test_train_config_contract(kwargs):
    with pytest.raises(ContractError):
        TrainConfig(**kwargs)


def test_grid_points_enumeration_order():
    points = grid_points({"learning_rate": [0.1, 0.01], "batch_size": [8, 16]})
    assert points == [{"learning_rate": 0.1, "batch_size": 8}, {"learning_rate": 0.1, "batch_size": 16},
                      {"learning_rate": 0.01, "batch_size": 8}, {"learning_rate": 0.01, "batch_size": 16}]
    with pytest.raises(ContractError):
        grid_points({"learning_rate": []})


@pytest.mark.parametrize("workers", [1, 3])
def test_grid_search_picks_lowest_validation_loss(workers):
    losses = {(0.1, 8): 0.5, (0.1, 16): 0.2, (0.01, 8): 0.3, (0.01, 16): 0.2}
    seen = []

    def train_fn(params, seed):
        seen.append(seed)
        return losses[(params["learning_rate"], params["batch_size"])]

    best, results = grid_search({"learning_rate": [0.1, 0.01], "batch_size": [8, 16]}, train_fn,
                                base_seed=4, max_workers=workers)
    assert best == {"learning_rate": 0.1, "batch_size": 16}
    assert [r.val_loss for r in results] == [0.5, 0.2, 0.3, 0.2]
    assert [r.seed for r in results] == [derive_seed(4, i) for i in range(4)]
    assert len(set(seen)) == 4


def test_grid_search_counts_failures_as_infinite():
    def train_fn(params, seed):
        if params["x"] == 1:
            raise RuntimeError("boom")
        return float(params["x"])

    best, results = grid_search({"x": [1, 5, 3]}, train_fn)
    assert best == {"x": 3}
    assert results[0].val_loss == math.inf and "boom" in results[0].error


def test_grid_space_and_hyperparameters_from_config():
    config = Config(config_file_path=None, environ={},
                    overrides={"GRID_LEARNING_RATE": "0.1,0.01", "GRID_BATCH_SIZE": "8, 16"})
    space = grid_space_from_config(config)
    assert space == {"learning_rate": [0.1, 0.01], "batch_size": [8, 16]}
    tuned = apply_hyperparameters(TrainConfig(), {"learning_rate": 0.1, "batch_size": 8, "dropout": 0.5}, 11)
    assert (tuned.learning_rate, tuned.batch_size, tuned.seed) == (0.1, 8, 11)
    assert grid_space_from_config(Config(config_file_path=None, environ={})) == {"learning_rate": [0.01, 0.003]}
