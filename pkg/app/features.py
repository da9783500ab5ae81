"""
特征文件读写

16 字节头：8 字节 magic b"SQZFEAT\\0"、u32 帧数 T、u32 维数 F，
随后是 T*F 个小端 float64，按行（帧）存放。
"""
import logging
import os
import struct

import numpy as np

from app.errors import FeatureFileError

logger = logging.getLogger(__name__)

MAGIC = b"SQZFEAT\0"
HEADER = struct.Struct("<8sII")


def write_features(path: str, features: np.ndarray) -> None:
    array = np.ascontiguousarray(features, dtype="<f8")
    if array.ndim != 2:
        raise FeatureFileError(f"features must be [T, F], got shape {array.shape}")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, array.shape[0], array.shape[1]))
        f.write(array.tobytes())


def read_features(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise FeatureFileError(f"cannot read feature file {path}: {e}") from e
    if len(raw) < HEADER.size:
        raise FeatureFileError(f"{path}: file shorter than the 16-byte header")
    magic, frames, dims = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    expected = HEADER.size + 8 * frames * dims
    if len(raw) != expected:
        raise FeatureFileError(f"{path}: expected {expected} bytes for T={frames}, F={dims}, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(np.float64)
    logger.debug(f"read features {path}: T={frames}, F={dims}")
    return data.reshape(frames, dims)
