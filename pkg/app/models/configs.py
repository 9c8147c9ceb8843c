# app/models/configs.py
"""
Model configurations.

``default_configs()`` holds the full-scale reconstructions used for the
parameter-count comparison; ``desk_configs()`` the small ones used to train on
synthetic data in minutes.
"""
import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Tuple

from app.core.exceptions import ContractError
from app.utils import constants

# channel counts of the default feature layout
DEFAULT_ENDOGENOUS = 5
DEFAULT_EXOGENOUS = 8

# learned: an additive trainable table per token position; sinusoidal: the fixed transformer table
POSITIONAL_KINDS = ("learned", "sinusoidal")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    def output_hw(self, height: int, width: int) -> Tuple[int, int]:
        h = conv_output_size(height, self.kernel, self.stride, self.padding)
        w = conv_output_size(width, self.kernel, self.stride, self.padding)
        if h < 1 or w < 1:
            raise ContractError(f"{self} leaves no output for a {height}x{width} input")
        return h, w


def _check_horizon(horizon: int) -> None:
    if horizon != constants.HORIZON:
        raise ContractError(f"horizon must be {constants.HORIZON}, got {horizon}")


@dataclass(frozen=True)
class LstmConfig:
    input_dim: int
    layers: int = 4
    hidden: int = 32
    horizon: int = constants.HORIZON

    def __post_init__(self):
        _check_horizon(self.horizon)
        if min(self.input_dim, self.layers, self.hidden) < 1:
            raise ContractError(f"LstmConfig: sizes must be positive: {self}")


@dataclass(frozen=True)
class ModelFConfig:
    """All channels stacked into one (C, H, W) input; conv blocks, flatten, dense layers."""
    in_channels: int
    height: int = constants.N_SCALES
    width: int = constants.WINDOW_HOURS
    conv: Tuple[ConvSpec, ...] = (ConvSpec(32), ConvSpec(64))
    dense: Tuple[int, ...] = (4200, 64)
    horizon: int = constants.HORIZON

    def __post_init__(self):
        _check_horizon(self.horizon)
        if not self.conv:
            raise ContractError("ModelFConfig: at least one conv block")

    def flatten_size(self) -> int:
        h, w = self.height, self.width
        for spec in self.conv:
            h, w = spec.output_hw(h, w)
        return self.conv[-1].out_channels * h * w


@dataclass(frozen=True)
class ModelFPrimeConfig:
    """
    Two branches with one conv layer each, cross-attention from endogenous
    queries to exogenous keys/values, then a dense head.

    A branch output C×H'×W' becomes W' tokens of dimension C·H'.
    """
    endo_channels: int
    exo_channels: int
    height: int = constants.N_SCALES
    width: int = constants.WINDOW_HOURS
    endo_conv: ConvSpec = ConvSpec(32)
    exo_conv: ConvSpec = ConvSpec(32)
    attention_dim: int = 768
    value_dim: int = 768
    heads: int = 1
    dense: Tuple[int, ...] = (216,)
    residual: bool = False
    positional: str = "learned"
    horizon: int = constants.HORIZON

    def __post_init__(self):
        _check_horizon(self.horizon)
        if self.positional not in POSITIONAL_KINDS:
            raise ContractError(f"ModelFPrimeConfig: positional must be one of {POSITIONAL_KINDS}, "
                                f"got '{self.positional}'")
        if min(self.attention_dim, self.value_dim, self.heads) < 1:
            raise ContractError(f"ModelFPrimeConfig: attention sizes must be positive: {self}")
        if self.residual and self.heads * self.value_dim != self.endo_token_dim():
            raise ContractError(f"ModelFPrimeConfig: residual needs heads*value_dim == endogenous token dim "
                                f"({self.heads * self.value_dim} != {self.endo_token_dim()})")

    def endo_tokens(self) -> Tuple[int, int]:
        """(token count, token dim) of the endogenous branch."""
        h, w = self.endo_conv.output_hw(self.height, self.width)
        return w, self.endo_conv.out_channels * h

    def exo_tokens(self) -> Tuple[int, int]:
        h, w = self.exo_conv.output_hw(self.height, self.width)
        return w, self.exo_conv.out_channels * h

    def endo_token_dim(self) -> int:
        return self.endo_tokens()[1]


CONFIG_CLASSES = {"lstm": LstmConfig, "f": ModelFConfig, "fprime": ModelFPrimeConfig}


def config_to_dict(config) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(kind: str, data: dict):
    """Inverse of config_to_dict for the model kinds with nested conv specs."""
    data = dict(data)
    if kind == "f":
        data["conv"] = tuple(ConvSpec(**spec) for spec in data["conv"])
        data["dense"] = tuple(data["dense"])
    elif kind == "fprime":
        data["endo_conv"] = ConvSpec(**data["endo_conv"])
        data["exo_conv"] = ConvSpec(**data["exo_conv"])
        data["dense"] = tuple(data["dense"])
    return data


def default_configs(endo_channels: int = DEFAULT_ENDOGENOUS, exo_channels: int = DEFAULT_EXOGENOUS,
                    height: int = constants.N_SCALES, width: int = constants.WINDOW_HOURS
                    ) -> Tuple[LstmConfig, ModelFConfig, ModelFPrimeConfig]:
    """Full-scale reconstructions: F near 155M parameters, F′ near 5.8M."""
    channels = endo_channels + exo_channels
    return (
        LstmConfig(input_dim=channels),
        ModelFConfig(in_channels=channels, height=height, width=width),
        ModelFPrimeConfig(endo_channels=endo_channels, exo_channels=exo_channels, height=height, width=width),
    )


def desk_configs(endo_channels: int = DEFAULT_ENDOGENOUS, exo_channels: int = DEFAULT_EXOGENOUS,
                 height: int = constants.N_SCALES, width: int = constants.WINDOW_HOURS
                 ) -> Tuple[LstmConfig, ModelFConfig, ModelFPrimeConfig]:
    """Small configurations (embedding and attention dims at most 16) for CPU training."""
    channels = endo_channels + exo_channels
    # 24x24 scalograms become 8 tokens of dimension 16 per branch
    tokens = ConvSpec(2, kernel=3, stride=3, padding=1)
    token_dim = tokens.out_channels * tokens.output_hw(height, width)[0]
    return (
        LstmConfig(input_dim=channels),
        ModelFConfig(in_channels=channels, height=height, width=width,
                     conv=(ConvSpec(4), ConvSpec(4, kernel=3, stride=2, padding=1)), dense=(32,)),
        ModelFPrimeConfig(endo_channels=endo_channels, exo_channels=exo_channels, height=height, width=width,
                          endo_conv=tokens, exo_conv=tokens, attention_dim=16, value_dim=token_dim,
                          dense=(32,), residual=True),
    )


def apply_model_hyperparameters(config, params: Mapping[str, Any]):
    """Copy of a model configuration with the grid values for its own fields replaced; other keys are ignored."""
    fields = {k: v for k, v in params.items() if k in config.__dataclass_fields__ and k != "horizon"}
    return dataclasses.replace(config, **fields) if fields else config


def model_config(kind: str, layout, scale: str = "desk", overrides: Optional[Mapping[str, Any]] = None):
    """
    Configuration of one model kind for a feature layout; ``scale`` is 'desk' or 'full'.
    ``overrides`` replaces fields the kind has (e.g. ``positional`` for fprime) and skips the rest.
    """
    if kind not in CONFIG_CLASSES:
        raise ContractError(f"unknown model kind '{kind}' (expected one of {sorted(CONFIG_CLASSES)})")
    if scale not in ("desk", "full"):
        raise ContractError(f"MODEL_SCALE must be 'desk' or 'full', got '{scale}'")
    build = desk_configs if scale == "desk" else default_configs
    lstm, f, fprime = build(layout.n_endogenous, layout.n_exogenous, layout.n_scales, layout.window_hours)
    return apply_model_hyperparameters({"lstm": lstm, "f": f, "fprime": fprime}[kind], overrides or {})
