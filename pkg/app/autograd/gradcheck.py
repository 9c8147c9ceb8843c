# app/autograd/gradcheck.py
"""Central finite-difference checks for analytic gradients."""
from typing import Callable, List, Sequence

import numpy as np

from app.autograd.tensor import Tape, Tensor, backward

DEFAULT_STEP = 1e-5


def numerical_gradient(fn: Callable[[], float], array: np.ndarray, eps: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences of ``fn`` with respect to every entry of ``array`` (perturbed in place)."""
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        original = array[idx]
        array[idx] = original + eps
        plus = fn()
        array[idx] = original - eps
        minus = fn()
        array[idx] = original
        grad[idx] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||); 0 when both are numerically zero."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def check_gradients(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor],
                    eps: float = DEFAULT_STEP) -> List[float]:
    """
    Compares backward() against central differences for each tensor in ``tensors``.

    ``loss_fn`` must rebuild the scalar loss from the given tensors on every call.

    Returns:
        One relative error per tensor.
    """
    for t in tensors:
        t.grad = None
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def value() -> float:
        return float(loss_fn().data)

    return [relative_error(a, numerical_gradient(value, t.data, eps)) for a, t in zip(analytic, tensors)]
