"""
合成复制任务

标签均匀采样；特征是标签的 one-hot（嵌入到 feature_dim 维），
每个标签在时间上重复 upsample 次，再加高斯噪声。
子采样 4 倍后每个标签大致对应一帧，所以默认不让相邻标签重复。
"""
import logging
from typing import Iterator, List, Optional, Tuple

import numpy as np

from app.autograd import ops
from app.schemas import SyntheticTask

logger = logging.getLogger(__name__)

Example = Tuple[np.ndarray, List[int]]


def draw_labels(task: SyntheticTask, rng: np.random.Generator) -> List[int]:
    labels: List[int] = []
    for _ in range(task.label_length):
        if task.allow_repeats or not labels:
            labels.append(int(rng.integers(0, task.vocab_size)))
        else:
            # 在其余 V-1 个标签中均匀取
            choice = int(rng.integers(0, task.vocab_size - 1))
            labels.append(choice if choice < labels[-1] else choice + 1)
    return labels


def render_features(labels: List[int], task: SyntheticTask, rng: np.random.Generator) -> np.ndarray:
    rows = ops.one_hot(labels, task.feature_dim).data
    features = np.repeat(rows, task.upsample, axis=0)
    if task.noise > 0:
        features = features + task.noise * rng.standard_normal(features.shape)
    return features


def gen_synthetic(task: SyntheticTask, n: int, seed: Optional[int] = None) -> List[Example]:
    """固定 seed 时逐比特可复现"""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(task.seed if seed is None else seed)
    dataset = []
    for _ in range(n):
        labels = draw_labels(task, rng)
        dataset.append((render_features(labels, task, rng), labels))
    return dataset


def stream_batches(task: SyntheticTask, batch_size: int, seed: Optional[int] = None) -> Iterator[List[Example]]:
    """无限批次流，每批都是新样本"""
    rng = np.random.default_rng(task.seed if seed is None else seed)
    while True:
        batch = []
        for _ in range(batch_size):
            labels = draw_labels(task, rng)
            batch.append((render_features(labels, task, rng), labels))
        yield batch
