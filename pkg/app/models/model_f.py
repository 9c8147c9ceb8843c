# app/models/model_f.py
from typing import Tuple

import numpy as np

from app.autograd import Tensor, as_tensor, conv2d, relu, reshape
from app.models.base import ForecastModel, Shapes
from app.models.configs import ModelFConfig


class ModelF(ForecastModel):
    """Single-branch scalogram CNN: every channel stacked into one input image."""
    kind = "f"

    @classmethod
    def parameter_shapes(cls, config: ModelFConfig) -> Shapes:
        shapes: Shapes = {}
        channels = config.in_channels
        for i, spec in enumerate(config.conv):
            shapes[f"conv{i}_k"] = (spec.out_channels, channels, spec.kernel, spec.kernel)
            shapes[f"conv{i}_b"] = (spec.out_channels,)
            channels = spec.out_channels
        width = config.flatten_size()
        for i, units in enumerate(config.dense):
            shapes[f"dense{i}_w"] = (width, units)
            shapes[f"dense{i}_b"] = (units,)
            width = units
        shapes["head_w"] = (width, config.horizon)
        shapes["head_b"] = (config.horizon,)
        return shapes

    def forward(self, stack) -> Tensor:
        """(C, H, W) → (24,), or batched (N, C, H, W) → (N, 24)."""
        cfg = self.config
        x = as_tensor(stack)
        single = x.ndim == 3
        if single:
            x = reshape(x, (1,) + x.shape)
        self.check_input("stack", x, (cfg.in_channels, cfg.height, cfg.width))

        for i, spec in enumerate(cfg.conv):
            x = relu(conv2d(x, self.params[f"conv{i}_k"], self.params[f"conv{i}_b"],
                            stride=spec.stride, padding=spec.padding))
        x = reshape(x, (x.shape[0], -1))
        for i in range(len(cfg.dense)):
            x = relu(x @ self.params[f"dense{i}_w"] + self.params[f"dense{i}_b"])
        out = x @ self.params["head_w"] + self.params["head_b"]
        return out[0] if single else out

    def inputs_from(self, batch) -> Tuple[np.ndarray, ...]:
        return (batch.stack,)


def model_f_forward(stack, model: ModelF) -> Tensor:
    return model.forward(stack)
