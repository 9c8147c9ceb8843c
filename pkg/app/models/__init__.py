from app.models.base import ForecastModel
from app.models.checkpoint import (MODEL_CLASSES, ModelCheckpoint, build_model, load_checkpoint, read_checkpoint,
                                   save_checkpoint)
from app.models.configs import (POSITIONAL_KINDS, ConvSpec, LstmConfig, ModelFConfig, ModelFPrimeConfig,
                                apply_model_hyperparameters, default_configs, desk_configs, model_config)
from app.models.linear import LinearConfig, LinearModel
from app.models.lstm import LstmModel, lstm_forward
from app.models.model_f import ModelF, model_f_forward
from app.models.model_fprime import ModelFPrime, model_fprime_forward

__all__ = [
    "ForecastModel", "MODEL_CLASSES", "ModelCheckpoint", "build_model", "load_checkpoint", "read_checkpoint",
    "save_checkpoint", "POSITIONAL_KINDS", "apply_model_hyperparameters", "ConvSpec", "LstmConfig", "ModelFConfig",
    "ModelFPrimeConfig", "default_configs", "desk_configs", "model_config", "LinearConfig", "LinearModel", "LstmModel",
    "lstm_forward", "ModelF", "model_f_forward", "ModelFPrime", "model_fprime_forward",
]
