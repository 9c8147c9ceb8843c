# app/models/model_fprime.py
"""
Dual-branch scalogram network with cross-attention.

    endogenous stack ─ conv ─ tokens + positions ─┐ queries
                                                  ├─ cross-attention ─ flatten ─ dense ─ 24
    exogenous stack  ─ conv ─ tokens + positions ─┘ keys, values

A conv output of shape (C, H', W') is read as W' tokens of dimension C·H',
one per time position.
"""
from typing import Tuple

import numpy as np

from app.autograd import Tensor, as_tensor, conv2d, relu, reshape, scaled_dot_product_attention, transpose
from app.models.base import ForecastModel, Shapes
from app.models.configs import ModelFPrimeConfig


def _tokens(feature_map: Tensor) -> Tensor:
    """(N, C, H, W) → (N, W, C·H)."""
    n, c, h, w = feature_map.shape
    return reshape(transpose(feature_map, (0, 3, 1, 2)), (n, w, c * h))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    """(N, T, heads·d) → (N, heads, T, d)."""
    n, t, width = x.shape
    return transpose(reshape(x, (n, t, heads, width // heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    n, heads, t, d = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (n, t, heads * d))


def sinusoidal_positions(tokens: int, dim: int) -> np.ndarray:
    """Fixed (tokens, dim) table: sines on even columns, cosines on odd ones, wavelengths growing to 10000."""
    position = np.arange(tokens, dtype=np.float64)[:, None]
    div_term = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-np.log(10000.0) / dim))
    table = np.zeros((tokens, dim))
    table[:, 0::2] = np.sin(position * div_term)
    table[:, 1::2] = np.cos(position * div_term[:dim // 2])
    return table


class ModelFPrime(ForecastModel):
    kind = "fprime"

    @classmethod
    def parameter_shapes(cls, config: ModelFPrimeConfig) -> Shapes:
        q_tokens, q_dim = config.endo_tokens()
        k_tokens, k_dim = config.exo_tokens()
        attention = config.heads * config.attention_dim
        values = config.heads * config.value_dim
        endo, exo = config.endo_conv, config.exo_conv
        shapes: Shapes = {
            "endo_conv_k": (endo.out_channels, config.endo_channels, endo.kernel, endo.kernel),
            "endo_conv_b": (endo.out_channels,),
            "exo_conv_k": (exo.out_channels, config.exo_channels, exo.kernel, exo.kernel),
            "exo_conv_b": (exo.out_channels,),
            "query_w": (q_dim, attention),
            "query_b": (attention,),
            "key_w": (k_dim, attention),
            "key_b": (attention,),
            "value_w": (k_dim, values),
            "value_b": (values,),
        }
        if config.positional == "learned":
            shapes["endo_pos"] = (q_tokens, q_dim)
            shapes["exo_pos"] = (k_tokens, k_dim)
        width = q_tokens * values
        for i, units in enumerate(config.dense):
            shapes[f"dense{i}_w"] = (width, units)
            shapes[f"dense{i}_b"] = (units,)
            width = units
        shapes["head_w"] = (width, config.horizon)
        shapes["head_b"] = (config.horizon,)
        return shapes

    def _branch(self, x: Tensor, prefix: str, spec) -> Tensor:
        fmap = relu(conv2d(x, self.params[f"{prefix}_conv_k"], self.params[f"{prefix}_conv_b"],
                           stride=spec.stride, padding=spec.padding))
        tokens = _tokens(fmap)
        if self.config.positional == "learned":
            return tokens + self.params[f"{prefix}_pos"]
        return tokens + sinusoidal_positions(tokens.shape[1], tokens.shape[2])

    def forward(self, endo, exo, return_attention: bool = False):
        """
        Args:
            endo: (N_c, H, W) or batched (B, N_c, H, W)
            exo: (N_e, H, W) or batched (B, N_e, H, W)
            return_attention: also return the (B, heads, T_q, T_k) attention weights

        Returns:
            (24,) or (B, 24) forecast in scaled units
        """
        cfg = self.config
        endo, exo = as_tensor(endo), as_tensor(exo)
        single = endo.ndim == 3
        if single:
            endo = reshape(endo, (1,) + endo.shape)
            exo = reshape(exo, (1,) + exo.shape)
        self.check_input("endogenous stack", endo, (cfg.endo_channels, cfg.height, cfg.width))
        self.check_input("exogenous stack", exo, (cfg.exo_channels, cfg.height, cfg.width))

        queries_in = self._branch(endo, "endo", cfg.endo_conv)
        keys_in = self._branch(exo, "exo", cfg.exo_conv)
        query = _split_heads(queries_in @ self.params["query_w"] + self.params["query_b"], cfg.heads)
        key = _split_heads(keys_in @ self.params["key_w"] + self.params["key_b"], cfg.heads)
        value = _split_heads(keys_in @ self.params["value_w"] + self.params["value_b"], cfg.heads)
        context, weights = scaled_dot_product_attention(query, key, value, return_weights=True)
        context = _merge_heads(context)
        if cfg.residual:
            context = context + queries_in

        x = reshape(context, (context.shape[0], -1))
        for i in range(len(cfg.dense)):
            x = relu(x @ self.params[f"dense{i}_w"] + self.params[f"dense{i}_b"])
        out = x @ self.params["head_w"] + self.params["head_b"]
        if single:
            out = out[0]
        return (out, weights.numpy()) if return_attention else out

    def inputs_from(self, batch) -> Tuple[np.ndarray, ...]:
        return batch.endogenous, batch.exogenous


def model_fprime_forward(endo, exo, model: ModelFPrime) -> Tensor:
    return model.forward(endo, exo)
