"""
SpecAugment：频率掩码与时间掩码，被掩区域置零
"""
from typing import List, Optional, Tuple

import numpy as np

from app.constants.presets import TIME_MASKS
from app.errors import ConfigError
from app.schemas import SpecAugmentParams

Band = Tuple[int, int]  # [start, end)


def draw_masks(frames: int, dims: int, p: SpecAugmentParams,
               rng: np.random.Generator) -> Tuple[List[Band], List[Band]]:
    """频率宽度 ~ U[0, freq_width]，时间宽度 ~ U[0, ratio*T]"""
    freq_bands: List[Band] = []
    for _ in range(p.freq_masks):
        width = min(int(rng.integers(0, p.freq_width + 1)), dims)
        start = int(rng.integers(0, dims - width + 1))
        freq_bands.append((start, start + width))
    max_time = int(p.time_mask_ratio * frames)
    time_bands: List[Band] = []
    for _ in range(p.time_masks):
        width = min(int(rng.integers(0, max_time + 1)), frames)
        start = int(rng.integers(0, frames - width + 1))
        time_bands.append((start, start + width))
    return freq_bands, time_bands


def mask_matrix(frames: int, dims: int, freq_bands: List[Band], time_bands: List[Band]) -> np.ndarray:
    mask = np.zeros((frames, dims), dtype=bool)
    for start, end in freq_bands:
        mask[:, start:end] = True
    for start, end in time_bands:
        mask[start:end, :] = True
    return mask


def spec_augment(features: np.ndarray, p: SpecAugmentParams, seed: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """返回新数组，输入不变；同一 seed 得到同一组掩码"""
    rng = rng if rng is not None else np.random.default_rng(seed)
    features = np.asarray(features, dtype=np.float64)
    frames, dims = features.shape
    freq_bands, time_bands = draw_masks(frames, dims, p, rng)
    out = features.copy()
    out[mask_matrix(frames, dims, freq_bands, time_bands)] = 0.0
    return out


def recipe_augment(preset: str, base: Optional[SpecAugmentParams] = None) -> SpecAugmentParams:
    """按预设取时间掩码个数，其余字段沿用 base"""
    if preset not in TIME_MASKS:
        raise ConfigError(f"no augmentation recipe for '{preset}', expected one of {sorted(TIME_MASKS)}",
                          field="augment_recipe")
    base = base or SpecAugmentParams()
    return base.model_copy(update={"time_masks": TIME_MASKS[preset]})
