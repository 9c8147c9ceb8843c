# app/autograd/tensor.py
"""
Tensor and Tape: the recording half of the reverse-mode engine.

Operations executed while a ``Tape`` is active (``with Tape() as tape:``) and
touching at least one tensor with ``requires_grad`` are appended to that tape.
``backward`` replays the tape in reverse. Outside a tape, operations simply
compute values, which keeps inference cheap and thread-safe.
"""
import logging
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError, DimensionError

logger = logging.getLogger(__name__)

_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Optional["Tape"]:
    """The innermost tape active on the calling thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """
    n-dimensional float64 array with an optional gradient.

    ``Tensor(data)`` copies ``data``; results of operations wrap their
    freshly computed arrays without copying.
    """
    __slots__ = ("data", "requires_grad", "grad", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(array, dtype=np.float64)
        out.requires_grad = False
        out.grad = None
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass(frozen=True)
class TapeEntry:
    """One executed operation: its output, inputs and the vector-Jacobian product."""
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Ordered record of executed operations; entries are appended in execution order."""

    def __init__(self):
        self.entries: List[TapeEntry] = []
        self._outputs = set()

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def record(self, entry: TapeEntry) -> None:
        self.entries.append(entry)
        self._outputs.add(id(entry.output))

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._outputs

    def __len__(self) -> int:
        return len(self.entries)


def make_result(op: str, data: np.ndarray, inputs: Sequence[Tensor],
                backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    """Wraps an operation's output and records it on the active tape when gradients are needed."""
    out = Tensor._wrap(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(TapeEntry(op, out, tuple(inputs), backward_fn))
    return out


def backward(loss: Tensor, tape: Tape) -> List[Tuple[Tensor, np.ndarray]]:
    """
    Back-propagates from a scalar ``loss`` through ``tape``.

    Every entry is visited once, in reverse order. Gradients arriving at a
    tensor from several consumers are summed. Leaf tensors (those not produced
    on the tape) accumulate into their existing ``grad``; intermediates get
    their gradient assigned.

    Returns:
        List of (leaf tensor, its grad) pairs, in order of first use on the tape.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss not in tape:
        raise ContractError("loss was not produced on the given tape")

    grads = {id(loss): np.ones_like(loss.data)}
    for entry in reversed(tape.entries):
        g = grads.get(id(entry.output))
        if g is None:
            continue
        entry.output.grad = g
        for tensor, input_grad in zip(entry.inputs, entry.backward(g)):
            if input_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grads[key] + input_grad if key in grads else input_grad

    leaves: List[Tuple[Tensor, np.ndarray]] = []
    seen = set()
    for entry in tape.entries:
        for tensor in entry.inputs:
            key = id(tensor)
            if key in seen or tensor in tape or not tensor.requires_grad:
                continue
            seen.add(key)
            g = grads.get(key)
            if g is None:
                continue
            tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
            leaves.append((tensor, tensor.grad))
    return leaves
