# app/autograd/params.py
"""Parameter initialization and counting."""
import math
from typing import Mapping, Sequence, Union

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform in ±√(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=tuple(shape))


def count_shapes(shapes: Mapping[str, Sequence[int]]) -> int:
    """Total element count of a name → shape mapping."""
    return int(np.sum([math.prod(shape) for shape in shapes.values()], dtype=np.int64))


def count_parameters(checkpoint: Union["ModelCheckpoint", Mapping[str, np.ndarray]]) -> int:  # noqa: F821
    """Sum of element counts of all trainable arrays in a checkpoint (or a name → array mapping)."""
    arrays = getattr(checkpoint, "arrays", checkpoint)
    return count_shapes({name: np.shape(array) for name, array in arrays.items()})
