# app/models/base.py
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.autograd import Tensor, count_shapes, glorot_uniform
from app.core.exceptions import ContractError, DimensionError

logger = logging.getLogger(__name__)

Shapes = Dict[str, Tuple[int, ...]]


def _is_bias(name: str) -> bool:
    return name.endswith("_b")


def _fans(shape: Tuple[int, ...]) -> Tuple[int, int]:
    if len(shape) == 4:  # conv kernels (C_out, C_in, kh, kw)
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    return shape[0], shape[-1]


class ForecastModel:
    """
    A model is a named set of parameter tensors plus a forward function.

    Weights are Glorot-uniform, biases zero, drawn in ``parameter_shapes``
    order from ``numpy.random.default_rng(seed)``. The feature layout and
    scaler travel with the model so checkpoints can de-scale forecasts.
    """
    kind = ""

    def __init__(self, config, seed: int = 0, layout=None, scaler=None, zero: bool = False):
        self.config = config
        self.layout = layout
        self.scaler = scaler
        rng = np.random.default_rng(seed)
        self.params: Dict[str, Tensor] = {}
        for name, shape in self.parameter_shapes(config).items():
            if zero or _is_bias(name):
                data = np.zeros(shape)
            else:
                data = glorot_uniform(rng, shape, *_fans(shape))
            self.params[name] = Tensor(data, requires_grad=True, name=name)

    @classmethod
    def parameter_shapes(cls, config) -> Shapes:
        raise NotImplementedError

    @classmethod
    def count_for(cls, config) -> int:
        """Parameter count of a configuration, without allocating it."""
        return count_shapes(cls.parameter_shapes(config))

    def num_parameters(self) -> int:
        return count_shapes({name: p.shape for name, p in self.params.items()})

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def forward(self, *inputs) -> Tensor:
        raise NotImplementedError

    def __call__(self, *inputs) -> Tensor:
        return self.forward(*inputs)

    def inputs_from(self, batch) -> Tuple[np.ndarray, ...]:
        """Model inputs for a Batch, in forward() argument order."""
        raise NotImplementedError

    def predict(self, batch) -> np.ndarray:
        """Scaled (B, 24) outputs; records nothing."""
        return self.forward(*self.inputs_from(batch)).numpy()

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        unexpected = set(state) - set(self.params)
        if missing or unexpected:
            raise ContractError(f"{self.kind}: state mismatch (missing {sorted(missing)}, unexpected {sorted(unexpected)})")
        for name, p in self.params.items():
            array = np.asarray(state[name], dtype=np.float64)
            if array.shape != p.shape:
                raise DimensionError(f"{self.kind}: parameter '{name}' has shape {p.shape}, state has {array.shape}")
            p.data[...] = array

    def check_input(self, name: str, tensor: Tensor, expected: Sequence[Optional[int]]) -> None:
        """Raises DimensionError unless the trailing axes match ``expected`` (None matches anything)."""
        trailing = tensor.shape[-len(expected):] if tensor.ndim >= len(expected) else None
        if trailing is None or any(e is not None and e != s for e, s in zip(expected, trailing)):
            raise DimensionError(f"{self.kind}: {name} has shape {tensor.shape}, expected (..., "
                                 f"{', '.join('*' if e is None else str(e) for e in expected)})")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.config}, parameters={self.num_parameters()})"
