"""
检查点文件读写

布局（小端）：
  8 字节 magic  b"SQZCKPT\\0"
  u32 版本号
  u32 配置 JSON 长度，随后是 UTF-8 编码的 ModelConfig JSON
  u32 条目数
  每个条目：u16 名称长度、名称、u8 维数、u32 x 维数 的形状、float64 数据
"""
import json
import logging
import os
import struct
from typing import Dict, Tuple

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.encoder import EncoderModel, build
from app.errors import CheckpointError
from app.schemas import ModelConfig

logger = logging.getLogger(__name__)

MAGIC = b"SQZCKPT\0"


def save_checkpoint(path: str, model: EncoderModel) -> None:
    state = model.state_dict()
    config_json = model.config.model_dump_json().encode("utf-8")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", settings.CHECKPOINT_FORMAT_VERSION, len(config_json)))
        f.write(config_json)
        f.write(struct.pack("<I", len(state)))
        for name in sorted(state):
            array = np.ascontiguousarray(state[name], dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", array.ndim))
            f.write(struct.pack(f"<{array.ndim}I", *array.shape))
            f.write(array.tobytes())
    logger.info(f"checkpoint written: {path} ({len(state)} arrays)")


def _read(f, size: int) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise CheckpointError("checkpoint file is truncated")
    return data


def read_checkpoint(path: str) -> Tuple[ModelConfig, Dict[str, np.ndarray]]:
    try:
        f = open(path, "rb")
    except OSError as e:
        raise CheckpointError(f"cannot open checkpoint {path}: {e}") from e
    with f:
        if _read(f, 8) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        version, config_len = struct.unpack("<II", _read(f, 8))
        if version > settings.CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        try:
            config = ModelConfig(**json.loads(_read(f, config_len).decode("utf-8")))
        except (ValueError, ValidationError) as e:
            raise CheckpointError(f"invalid config in checkpoint: {e}") from e
        (count,) = struct.unpack("<I", _read(f, 4))
        state: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read(f, 2))
            name = _read(f, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read(f, 1))
            shape = struct.unpack(f"<{ndim}I", _read(f, 4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            state[name] = np.frombuffer(_read(f, 8 * size), dtype="<f8").astype(np.float64).reshape(shape)
        if f.read(1):
            raise CheckpointError("trailing bytes after checkpoint entries")
    return config, state


def load_checkpoint(path: str) -> EncoderModel:
    config, state = read_checkpoint(path)
    model = build(config, seed=0)
    model.load_state_dict(state)
    logger.info(f"checkpoint loaded: {path}")
    return model
