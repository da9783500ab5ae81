"""
学习率调度

  t < T_0                 lr_peak * t / T_0
  T_0 <= t < T_0+T_peak   lr_peak
  t >= T_0+T_peak         lr_peak * T_0^d / (t - T_peak)^d

d=0.5、T_peak=0 时退化为 Noam 调度。
"""
import math
from typing import List, Tuple

from app.constants.presets import DECAY_RATE, PEAK_EPOCHS, PEAK_LR, WARMUP_EPOCHS
from app.errors import ConfigError
from app.schemas import ScheduleParams


def lr(t: float, p: ScheduleParams) -> float:
    if t < 0:
        raise ValueError(f"step must be non-negative, got {t}")
    if t < p.warmup_steps:
        return p.lr_peak * t / p.warmup_steps
    if t < p.warmup_steps + p.peak_steps:
        return p.lr_peak
    return p.lr_peak * p.warmup_steps ** p.decay / (t - p.peak_steps) ** p.decay


def noam_lr(t: float, d_model: int, warmup: int, factor: float = 1.0) -> float:
    """经典 Noam：factor * d_model^-0.5 * min(t^-0.5, t * warmup^-1.5)"""
    if t <= 0:
        return 0.0
    return factor * d_model ** -0.5 * min(t ** -0.5, t * warmup ** -1.5)


def noam_params(d_model: int, warmup: int, factor: float = 1.0) -> ScheduleParams:
    """与 noam_lr 等价的 ScheduleParams"""
    peak = factor * d_model ** -0.5 * warmup ** -0.5
    return ScheduleParams(lr_peak=peak, warmup_steps=warmup, peak_steps=0, decay=0.5)


def epochs_to_steps(epochs: float, steps_per_epoch: int) -> int:
    return int(math.ceil(epochs * steps_per_epoch))


def recipe_schedule(size: str, steps_per_epoch: int) -> ScheduleParams:
    """按模型档位给出 20 轮预热 + 160 轮平台 + d=1 的步数化调度"""
    if size not in PEAK_LR:
        raise ConfigError(f"unknown size '{size}', expected one of {sorted(PEAK_LR)}", field="size")
    return ScheduleParams(
        lr_peak=PEAK_LR[size],
        warmup_steps=epochs_to_steps(WARMUP_EPOCHS, steps_per_epoch),
        peak_steps=epochs_to_steps(PEAK_EPOCHS, steps_per_epoch),
        decay=DECAY_RATE,
    )


def sample_curve(p: ScheduleParams, steps: int, every: int = 1) -> List[Tuple[int, float]]:
    return [(t, lr(t, p)) for t in range(0, steps + 1, max(every, 1))]
