# app/services/training.py
"""
Mini-batch ADAM training with best-epoch early stopping, and grid search.

Progress is logged one line per epoch:

    epoch=<n> train_loss=<x> val_loss=<y>
"""
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.autograd import AdamState, Tape, adam_step, backward, mse_loss
from app.core.exceptions import ContractError, TrainingError
from app.core.threading import Worker, run_workers
from app.models.base import ForecastModel

logger = logging.getLogger(__name__)

MIN_DELTA = 1e-9


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 0.01
    max_epochs: int = 150
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError(f"TrainConfig: batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ContractError(f"TrainConfig: patience must be >= 1, got {self.patience}")
        if self.max_epochs < 0:
            raise ContractError(f"TrainConfig: max_epochs must be >= 0, got {self.max_epochs}")
        if not self.learning_rate > 0:
            raise ContractError(f"TrainConfig: learning_rate must be positive, got {self.learning_rate}")

    @classmethod
    def from_config(cls, config) -> "TrainConfig":
        return cls(
            batch_size=config.get("BATCH_SIZE", 256, var_type=int),
            learning_rate=config.get("LEARNING_RATE", 0.01, var_type=float),
            max_epochs=config.get("MAX_EPOCHS", 150, var_type=int),
            patience=config.get("PATIENCE", 10, var_type=int),
            seed=config.get("SEED", 0, var_type=int),
        )


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: Optional[int] = None   # 1-based

    def __len__(self) -> int:
        return len(self.val_loss)

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1] if self.best_epoch else math.inf

    def rows(self) -> List[Tuple[int, float, float]]:
        return [(epoch, t, v) for epoch, (t, v) in enumerate(zip(self.train_loss, self.val_loss), start=1)]


@dataclass
class ArrayDataset:
    """Plain feature/target arrays usable wherever a Batch is, e.g. for LinearModel."""
    features: np.ndarray
    target: np.ndarray

    def __len__(self) -> int:
        return self.target.shape[0]

    def take(self, indices: Sequence[int]) -> "ArrayDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return ArrayDataset(self.features[indices], self.target[indices])


def early_stop_check(val_losses: Sequence[float], patience: int) -> bool:
    """
    True iff the last ``patience`` epochs brought no improvement, i.e. no loss
    fell more than 1e-9 below the best loss seen before it.
    """
    losses = list(getattr(val_losses, "val_loss", val_losses))
    if not losses:
        raise ContractError("early_stop_check: empty history")
    best = math.inf
    since_improvement = 0
    for loss in losses:
        if loss < best - MIN_DELTA:
            best = loss
            since_improvement = 0
        else:
            since_improvement += 1
    return since_improvement >= patience


def batch_indices(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """A seeded permutation cut into batches; the last one may be short."""
    order = rng.permutation(n)
    return [order[start:start + batch_size] for start in range(0, n, batch_size)]


def evaluate_loss(model: ForecastModel, dataset) -> float:
    prediction = model.forward(*model.inputs_from(dataset))
    return float(mse_loss(prediction, dataset.target).data)


def train(model: ForecastModel, train_set, val_set, config: TrainConfig) -> Tuple[ForecastModel, TrainHistory]:
    """
    Trains ``model`` in place and returns it with the parameters of its best
    validation epoch restored.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ContractError(f"train: empty split (train={len(train_set)}, val={len(val_set)})")
    history = TrainHistory()
    if config.max_epochs == 0:
        return model, history

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = AdamState(lr=config.learning_rate)
    best_state = model.state_dict()
    logger.info(f"Training {model.kind} ({model.num_parameters()} parameters) on {len(train_set)} samples, "
                f"{len(val_set)} validation; batch_size={config.batch_size} lr={config.learning_rate}")

    for epoch in range(1, config.max_epochs + 1):
        total = 0.0
        for indices in batch_indices(len(train_set), config.batch_size, rng):
            batch = train_set.take(indices)
            model.zero_grad()
            with Tape() as tape:
                loss = mse_loss(model.forward(*model.inputs_from(batch)), batch.target)
            backward(loss, tape)
            adam_step(params, [p.grad for p in params], state)
            total += float(loss.data) * len(indices)
        train_loss = total / len(train_set)
        val_loss = evaluate_loss(model, val_set)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(f"{model.kind}: loss diverged at epoch {epoch} "
                                f"(train_loss={train_loss}, val_loss={val_loss})", last_finite_epoch=epoch - 1)

        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        logger.info(f"epoch={epoch} train_loss={train_loss:.9g} val_loss={val_loss:.9g}")
        if history.best_epoch is None or val_loss < history.best_val_loss - MIN_DELTA:
            history.best_epoch = epoch
            best_state = model.state_dict()
        if early_stop_check(history.val_loss, config.patience):
            logger.info(f"Early stopping at epoch {epoch}; best epoch {history.best_epoch}")
            break

    model.load_state_dict(best_state)
    return model, history


@dataclass
class GridResult:
    index: int
    params: Dict[str, Any]
    seed: int
    val_loss: float
    error: Optional[str] = None
    outcome: Any = None


def grid_points(space: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product in enumeration order (last key varies fastest)."""
    if not space or any(len(values) == 0 for values in space.values()):
        raise ContractError(f"grid_search: every hyperparameter needs at least one value, got {dict(space)}")
    names = list(space)
    return [dict(zip(names, combo)) for combo in itertools.product(*(space[name] for name in names))]


def derive_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def grid_search(space: Mapping[str, Sequence[Any]], train_fn: Callable[[Dict[str, Any], int], Any],
                base_seed: int = 0, max_workers: int = 1) -> Tuple[Dict[str, Any], List[GridResult]]:
    """
    Trains every point of ``space`` with ``train_fn(params, seed)``.

    ``train_fn`` returns either a final validation loss or an object with a
    ``val_loss`` attribute (kept as ``GridResult.outcome``). The best point has
    the lowest validation loss; ties go to the earliest point. Failed cells
    count as infinite loss.
    """
    points = grid_points(space)
    seeds = [derive_seed(base_seed, i) for i in range(len(points))]
    workers = [Worker(train_fn, params, seed) for params, seed in zip(points, seeds)]
    outcomes = run_workers(workers, max_workers)

    results: List[GridResult] = []
    for i, (params, seed, outcome) in enumerate(zip(points, seeds, outcomes)):
        if not outcome.ok:
            logger.warning(f"Grid point {params} failed: {outcome.error[1]}")
            results.append(GridResult(i, params, seed, math.inf, error=str(outcome.error[1])))
            continue
        value = outcome.result
        loss = float(getattr(value, "val_loss", value))
        if math.isnan(loss):
            loss = math.inf
        results.append(GridResult(i, params, seed, loss, outcome=value))
        logger.info(f"Grid point {i}: {params} val_loss={loss:.9g}")

    best = min(results, key=lambda r: (r.val_loss, r.index))
    logger.info(f"Best grid point: {best.params} (val_loss={best.val_loss:.9g})")
    return best.params, results


def grid_space_from_config(config) -> Dict[str, List[Any]]:
    """``GRID_<NAME> = v1,v2`` settings as {name: [values]}; numbers parsed as int or float."""
    space = {}
    for name, raw in config.get_prefixed("GRID_").items():
        if name == "workers":
            continue
        values = raw.split(",") if isinstance(raw, str) else list(raw) if isinstance(raw, (list, tuple)) else [raw]
        space[name] = [_parse_number(v) for v in values if str(v).strip()]
    return space or {"learning_rate": [0.01, 0.003]}


def _parse_number(value: Any) -> Any:
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def apply_hyperparameters(config: TrainConfig, params: Mapping[str, Any], seed: int) -> TrainConfig:
    """TrainConfig with grid values for its own fields replaced, and the cell seed."""
    fields = {k: v for k, v in params.items() if k in TrainConfig.__dataclass_fields__ and k != "seed"}
    return replace(config, seed=seed, **fields)
