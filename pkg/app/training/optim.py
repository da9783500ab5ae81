"""
AdamW：权重衰减与梯度解耦，直接按 lr * weight_decay 缩放参数
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.autograd import Tensor
from app.errors import ShapeError
from app.schemas import OptimizerParams

logger = logging.getLogger(__name__)


class AdamWState(BaseModel):
    """一阶、二阶矩估计与步数"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: int = 0
    exp_avg: List[np.ndarray]
    exp_avg_sq: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamWState":
        return cls(
            exp_avg=[np.zeros_like(p) for p in params],
            exp_avg_sq=[np.zeros_like(p) for p in params],
        )


def adamw_step(
    params: Sequence[np.ndarray],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamWState,
    lr: float,
    betas=(0.9, 0.98),
    eps: float = 1e-9,
    weight_decay: float = 0.0,
) -> AdamWState:
    """原地更新 params 与 state；梯度为 None 的参数只做权重衰减"""
    if len(params) != len(state.exp_avg) or len(params) != len(grads):
        raise ShapeError(
            f"adamw_step: {len(params)} params, {len(grads)} grads, {len(state.exp_avg)} state slots"
        )
    beta1, beta2 = betas
    state.step += 1
    bias1 = 1.0 - beta1 ** state.step
    bias2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.exp_avg, state.exp_avg_sq):
        if m.shape != p.shape or (g is not None and g.shape != p.shape):
            raise ShapeError(f"adamw_step: parameter {p.shape} vs grad/state {m.shape}")
        if weight_decay:
            p *= 1.0 - lr * weight_decay
        if g is None:
            continue
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
    return state


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """按全局范数裁剪梯度，返回裁剪前的范数"""
    grads = [p.grad for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if total > max_norm > 0:
        factor = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return total


class AdamW:
    """面向 Tensor 参数列表的有状态封装"""

    def __init__(self, params: Sequence[Tensor], options: Optional[OptimizerParams] = None):
        self.params = list(params)
        self.options = options or OptimizerParams()
        self.state = AdamWState.zeros_like([p.data for p in self.params])

    def step(self, lr: float) -> None:
        o = self.options
        adamw_step(
            [p.data for p in self.params],
            [p.grad for p in self.params],
            self.state,
            lr,
            betas=(o.beta1, o.beta2),
            eps=o.eps,
            weight_decay=o.weight_decay,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
