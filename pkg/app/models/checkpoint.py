# app/models/checkpoint.py
"""
Binary model checkpoints (little-endian):

    magic        8 bytes  b"HEATCKPT"
    version      uint32
    kind         uint32 length + UTF-8
    config       uint32 length + UTF-8 JSON
    metadata     uint32 length + UTF-8 JSON   (feature layout and scaler)
    array count  uint32
    per array    uint32 length + UTF-8 name, uint32 ndim, ndim × uint64 dims, float64 data
"""
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from app.core.exceptions import ContractError, DataFormatError
from app.models.base import ForecastModel
from app.models.configs import CONFIG_CLASSES, config_from_dict, config_to_dict
from app.models.linear import LinearConfig, LinearModel
from app.models.lstm import LstmModel
from app.models.model_f import ModelF
from app.models.model_fprime import ModelFPrime
from app.services.features import FeatureLayout, FeatureScaler
from app.utils import constants

logger = logging.getLogger(__name__)

MODEL_CLASSES = {"lstm": LstmModel, "f": ModelF, "fprime": ModelFPrime, "linear": LinearModel}
_CONFIG_CLASSES = dict(CONFIG_CLASSES, linear=LinearConfig)


@dataclass
class ModelCheckpoint:
    kind: str
    config: dict
    arrays: Dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    version: int = constants.CHECKPOINT_VERSION


def build_model(kind: str, config, seed: int = 0, layout=None, scaler=None) -> ForecastModel:
    if kind not in MODEL_CLASSES:
        raise ContractError(f"unknown model kind '{kind}' (expected one of {sorted(MODEL_CLASSES)})")
    return MODEL_CLASSES[kind](config, seed=seed, layout=layout, scaler=scaler)


def to_checkpoint(model: ForecastModel) -> ModelCheckpoint:
    metadata = {
        "layout": model.layout.to_dict() if model.layout is not None else None,
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
    }
    return ModelCheckpoint(model.kind, config_to_dict(model.config), model.state_dict(), metadata)


def from_checkpoint(checkpoint: ModelCheckpoint) -> ForecastModel:
    kind = checkpoint.kind
    if kind not in MODEL_CLASSES:
        raise DataFormatError(f"checkpoint holds unknown model kind '{kind}'")
    try:
        config = _CONFIG_CLASSES[kind](**config_from_dict(kind, checkpoint.config))
    except (TypeError, KeyError) as e:
        raise DataFormatError(f"checkpoint config does not describe a '{kind}' model: {e}") from e
    layout = checkpoint.metadata.get("layout")
    scaler = checkpoint.metadata.get("scaler")
    model = MODEL_CLASSES[kind](config, layout=FeatureLayout.from_dict(layout) if layout else None,
                                scaler=FeatureScaler.from_dict(scaler) if scaler else None, zero=True)
    model.load_state_dict(checkpoint.arrays)
    return model


def _pack_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode_checkpoint(checkpoint: ModelCheckpoint) -> bytes:
    parts = [constants.CHECKPOINT_MAGIC, struct.pack("<I", checkpoint.version),
             _pack_text(checkpoint.kind),
             _pack_text(json.dumps(checkpoint.config, sort_keys=True)),
             _pack_text(json.dumps(checkpoint.metadata, sort_keys=True)),
             struct.pack("<I", len(checkpoint.arrays))]
    for name, array in checkpoint.arrays.items():
        array = np.asarray(array, dtype="<f8")
        parts.append(_pack_text(name))
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(np.ascontiguousarray(array).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, path: Optional[str]):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise DataFormatError(f"truncated checkpoint (needed {size} bytes at offset {self.offset})", path=self.path)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def uint32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.uint32()).decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataFormatError(f"corrupt text field in checkpoint: {e}", path=self.path) from e

    def json(self) -> dict:
        try:
            return json.loads(self.text())
        except json.JSONDecodeError as e:
            raise DataFormatError(f"corrupt JSON block in checkpoint: {e}", path=self.path) from e


def decode_checkpoint(data: bytes, path: Optional[str] = None) -> ModelCheckpoint:
    reader = _Reader(data, path)
    if reader.take(len(constants.CHECKPOINT_MAGIC)) != constants.CHECKPOINT_MAGIC:
        raise DataFormatError("not a checkpoint file (bad magic bytes)", path=path)
    version = reader.uint32()
    if version != constants.CHECKPOINT_VERSION:
        raise DataFormatError(f"checkpoint format version {version}, expected {constants.CHECKPOINT_VERSION}",
                              path=path)
    kind = reader.text()
    config = reader.json()
    metadata = reader.json()
    arrays: Dict[str, np.ndarray] = {}
    for _ in range(reader.uint32()):
        name = reader.text()
        ndim = reader.uint32()
        shape = struct.unpack(f"<{ndim}Q", reader.take(8 * ndim))
        count = math.prod(shape)
        arrays[name] = np.frombuffer(reader.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if reader.offset != len(data):
        raise DataFormatError(f"{len(data) - reader.offset} unexpected trailing bytes in checkpoint", path=path)
    return ModelCheckpoint(kind, config, arrays, metadata, version)


def save_checkpoint(model: ForecastModel, path: str) -> str:
    data = encode_checkpoint(to_checkpoint(model))
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise DataFormatError(f"could not write checkpoint: {e}", path=path) from e
    logger.info(f"Saved {model.kind} checkpoint ({model.num_parameters()} parameters) to {path}")
    return path


def read_checkpoint(path: str) -> ModelCheckpoint:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DataFormatError(f"could not read checkpoint: {e}", path=path) from e
    return decode_checkpoint(data, path)


def load_checkpoint(path: str) -> ForecastModel:
    model = from_checkpoint(read_checkpoint(path))
    logger.info(f"Loaded {model.kind} checkpoint from {path}")
    return model
