# app/models/lstm.py
from typing import Tuple

import numpy as np

from app.autograd import Tensor, as_tensor, reshape, sigmoid, tanh
from app.core.exceptions import ContractError
from app.models.base import ForecastModel, Shapes
from app.models.configs import LstmConfig


class LstmModel(ForecastModel):
    """
    Stacked LSTM over the hourly channel values; the last hidden state of the
    top layer goes through a linear head to 24 outputs.

    Gates are packed as [input, forget, candidate, output] along the last
    axis of ``lstm{l}_wx`` (in, 4H), ``lstm{l}_wh`` (H, 4H) and ``lstm{l}_b``.
    """
    kind = "lstm"

    @classmethod
    def parameter_shapes(cls, config: LstmConfig) -> Shapes:
        shapes: Shapes = {}
        width = config.input_dim
        for layer in range(config.layers):
            shapes[f"lstm{layer}_wx"] = (width, 4 * config.hidden)
            shapes[f"lstm{layer}_wh"] = (config.hidden, 4 * config.hidden)
            shapes[f"lstm{layer}_b"] = (4 * config.hidden,)
            width = config.hidden
        shapes["head_w"] = (config.hidden, config.horizon)
        shapes["head_b"] = (config.horizon,)
        return shapes

    def forward(self, sequence) -> Tensor:
        """(T, input_dim) → (24,), or batched (B, T, input_dim) → (B, 24)."""
        x = as_tensor(sequence)
        single = x.ndim == 2
        if single:
            x = reshape(x, (1,) + x.shape)
        self.check_input("sequence", x, (None, self.config.input_dim))
        batch, steps = x.shape[0], x.shape[1]
        if steps < 1:
            raise ContractError("lstm: sequence needs at least one time step")

        hidden = self.config.hidden
        inputs = [x[:, t, :] for t in range(steps)]
        for layer in range(self.config.layers):
            wx = self.params[f"lstm{layer}_wx"]
            wh = self.params[f"lstm{layer}_wh"]
            b = self.params[f"lstm{layer}_b"]
            h = Tensor(np.zeros((batch, hidden)))
            c = Tensor(np.zeros((batch, hidden)))
            outputs = []
            for x_t in inputs:
                z = x_t @ wx + h @ wh + b
                i = sigmoid(z[:, :hidden])
                f = sigmoid(z[:, hidden:2 * hidden])
                g = tanh(z[:, 2 * hidden:3 * hidden])
                o = sigmoid(z[:, 3 * hidden:])
                c = f * c + i * g
                h = o * tanh(c)
                outputs.append(h)
            inputs = outputs

        out = inputs[-1] @ self.params["head_w"] + self.params["head_b"]
        return out[0] if single else out

    def inputs_from(self, batch) -> Tuple[np.ndarray, ...]:
        return (batch.sequence,)


def lstm_forward(window_features, model: LstmModel) -> Tensor:
    return model.forward(window_features)
