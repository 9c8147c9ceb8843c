# app/autograd/optim.py
"""ADAM optimizer with bias-corrected moment estimates."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from app.autograd.tensor import Tensor
from app.core.exceptions import ContractError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Per-parameter moments ``m``/``v`` and the step counter ``t``."""
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]], state: AdamState) -> AdamState:
    """
    Applies one ADAM update in place to ``params`` and returns ``state``.

    A ``None`` gradient counts as zero. Moments are created lazily on the
    first step.
    """
    if len(params) != len(grads):
        raise ContractError(f"adam_step: {len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params) or len(state.v) != len(params):
        raise ContractError(f"adam_step: state tracks {len(state.m)} parameters, got {len(params)}")
    grads = [np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
             for p, g in zip(params, grads)]
    for i, (p, g, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        if not (p.shape == g.shape == m.shape == v.shape):
            raise ContractError(f"adam_step: parameter {i} shape {p.shape}, gradient {g.shape}, moment {m.shape}")

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return state


class Adam:
    """Holds a parameter list and its AdamState; reads gradients from ``Tensor.grad``."""

    def __init__(self, params: Sequence[Tensor], lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
