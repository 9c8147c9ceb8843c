# app/models/linear.py
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.autograd import Tensor, as_tensor
from app.models.base import ForecastModel, Shapes
from app.utils import constants


@dataclass(frozen=True)
class LinearConfig:
    input_dim: int
    horizon: int = constants.HORIZON


class LinearModel(ForecastModel):
    """One dense map from a flat feature vector to the horizon."""
    kind = "linear"

    @classmethod
    def parameter_shapes(cls, config: LinearConfig) -> Shapes:
        return {"dense_w": (config.input_dim, config.horizon), "dense_b": (config.horizon,)}

    def forward(self, features) -> Tensor:
        x = as_tensor(features)
        self.check_input("features", x, (self.config.input_dim,))
        return x @ self.params["dense_w"] + self.params["dense_b"]

    def inputs_from(self, batch) -> Tuple[np.ndarray, ...]:
        features = getattr(batch, "features", None)
        if features is None:
            features = batch.sequence.reshape(len(batch), -1)
        return (features,)
