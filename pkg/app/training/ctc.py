"""
CTC 损失（对数域前向-后向）

输入是逐帧对数概率 [T, V+1]，blank 默认是最后一个类别。
反向传播直接给出 -occupancy：对 log_probs[t, k] 的梯度等于
负的“t 时刻经过标签 k 的对齐后验概率”。
"""
import logging
from typing import Optional, Sequence

import numpy as np

from app.autograd import Tensor
from app.autograd.tensor import make_result
from app.errors import AlignmentError, ShapeError

logger = logging.getLogger(__name__)


def min_frames(target: Sequence[int]) -> int:
    """目标序列至少需要的帧数：长度 + 相邻重复处必须插入的 blank 数"""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _extended(target: Sequence[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = np.asarray(target, dtype=np.int64)
    return ext


def _logsumexp_rows(*terms: np.ndarray) -> np.ndarray:
    stacked = np.stack(terms)
    peak = stacked.max(axis=0)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.exp(stacked - safe).sum(axis=0))


def _forward_backward(lp: np.ndarray, ext: np.ndarray, blank: int):
    T, S = lp.shape[0], ext.shape[0]
    neg_inf = -np.inf
    emit = lp[:, ext]  # [T, S]
    # s 可以从 s-2 跳转：当前不是 blank 且与 s-2 的标签不同
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), neg_inf)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        shift1 = np.full(S, neg_inf)
        shift1[1:] = prev[:-1]
        shift2 = np.full(S, neg_inf)
        shift2[2:] = prev[:-2]
        shift2[~skip] = neg_inf
        alpha[t] = _logsumexp_rows(prev, shift1, shift2) + emit[t]

    beta = np.full((T, S), neg_inf)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = emit[T - 1, S - 2]
    skip_from = np.zeros(S, dtype=bool)
    skip_from[:-2] = skip[2:]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        shift1 = np.full(S, neg_inf)
        shift1[:-1] = nxt[1:]
        shift2 = np.full(S, neg_inf)
        shift2[:-2] = nxt[2:]
        shift2[~skip_from] = neg_inf
        beta[t] = _logsumexp_rows(nxt, shift1, shift2) + emit[t]

    tail = [alpha[T - 1, S - 1]]
    if S > 1:
        tail.append(alpha[T - 1, S - 2])
    log_likelihood = float(_logsumexp_rows(*[np.asarray(v) for v in tail]))
    return alpha, beta, emit, log_likelihood


def ctc_loss(log_probs: Tensor, target: Sequence[int], blank: Optional[int] = None) -> Tensor:
    """-log p(target | log_probs)，可微"""
    if log_probs.ndim != 2:
        raise ShapeError(f"ctc_loss expects [T, V+1] log-probabilities, got {log_probs.shape}")
    T, K = log_probs.shape
    blank = K - 1 if blank is None else blank
    target = [int(t) for t in target]
    if any(t < 0 or t >= K or t == blank for t in target):
        raise AlignmentError(f"target tokens must lie in [0, {K}) and differ from blank {blank}: {target}")
    needed = min_frames(target)
    if T < max(needed, 1):
        raise AlignmentError(f"target of length {len(target)} needs at least {needed} frames, got {T}")

    ext = _extended(target, blank)
    lp = log_probs.data
    alpha, beta, emit, log_likelihood = _forward_backward(lp, ext, blank)
    if log_likelihood == -np.inf:
        raise AlignmentError("no alignment has non-zero probability")

    def _backward(g):
        # alpha 与 beta 都含当前帧的发射概率，相加时减去一次
        with np.errstate(invalid="ignore"):
            log_occ = alpha + beta - emit - log_likelihood
        occ = np.where(np.isfinite(log_occ), np.exp(log_occ), 0.0)
        grad = np.zeros_like(lp)
        for s, label in enumerate(ext):
            grad[:, label] -= occ[:, s]
        return (grad * g,)

    return make_result(np.asarray(-log_likelihood), (log_probs,), _backward, "ctc_loss")

