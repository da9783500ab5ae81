"""
多头自注意力

relative: 双向相对位置注意力。位置编码覆盖相对距离 T-1 ... -(T-1) 共 2T-1 个，
  分数 = (q + u)·k + rel_shift((q + v)·p)，p 为位置编码经无偏置投影后的结果。
  移位后 query i 对 key j 的位置项只由 q_i 与距离 i-j 决定。
absolute: 普通缩放点积注意力，正弦位置编码在编码器入口一次性加到输入上。
"""
import logging
import math
from typing import Optional

import numpy as np

from app.autograd import Tensor, ops
from app.errors import ShapeError
from app.nn.layers import Linear
from app.nn.module import Module, trunc_normal

logger = logging.getLogger(__name__)


def sinusoid_table(positions: np.ndarray, dim: int) -> np.ndarray:
    """标准正弦位置编码，偶数通道 sin、奇数通道 cos"""
    positions = np.asarray(positions, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-math.log(10000.0) / dim))
    table = np.zeros((positions.shape[0], dim))
    table[:, 0::2] = np.sin(positions * div)
    table[:, 1::2] = np.cos(positions * div)[:, : dim // 2]
    return table


def relative_positions(length: int, dim: int) -> Tensor:
    # 第 p 行对应相对距离 length-1-p，共 2*length-1 行
    return Tensor(sinusoid_table(np.arange(length - 1, -length, -1), dim))


class MultiHeadAttention(Module):
    def __init__(
        self,
        dim: int,
        heads: int,
        rng: np.random.Generator,
        positional: str = "relative",
        dropout: float = 0.0,
    ):
        super().__init__()
        if dim % heads != 0:
            raise ShapeError(f"dim {dim} is not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.positional = positional
        self.dropout = dropout
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.output = Linear(dim, dim, rng)
        if positional == "relative":
            self.pos_proj = Linear(dim, dim, rng, bias=False)
            self.pos_bias_u = trunc_normal(rng, (heads, self.head_dim), self.head_dim)
            self.pos_bias_v = trunc_normal(rng, (heads, self.head_dim), self.head_dim)
        # 最近一次前向的注意力权重 [h, T, T]
        self.last_attention: Optional[np.ndarray] = None

    def input_linears(self):
        """直接作用在模块输入上的线性层（Scaling 合并的目标）"""
        return [self.query, self.key, self.value]

    def _split_heads(self, x: Tensor) -> Tensor:
        T = x.shape[0]
        return ops.transpose(ops.reshape(x, (T, self.heads, self.head_dim)), (1, 0, 2))

    def body(self, x: Tensor, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError(f"attention expects [T, {self.dim}], got {x.shape}")
        T = x.shape[0]
        q = self._split_heads(self.query.forward(x))
        k = self._split_heads(self.key.forward(x))
        v = self._split_heads(self.value.forward(x))
        k_t = ops.transpose(k, (0, 2, 1))

        if self.positional == "relative":
            p = self._split_heads(self.pos_proj.forward(relative_positions(T, self.dim)))
            u = ops.reshape(self.pos_bias_u, (self.heads, 1, self.head_dim))
            bv = ops.reshape(self.pos_bias_v, (self.heads, 1, self.head_dim))
            content = ops.matmul(q + u, k_t)
            position = ops.rel_shift(ops.matmul(q + bv, ops.transpose(p, (0, 2, 1))))
            scores = content + position
        else:
            scores = ops.matmul(q, k_t)

        attn = ops.softmax(ops.scale(scores, 1.0 / math.sqrt(self.head_dim)), axis=-1)
        self.last_attention = attn.data.copy()
        attn = ops.dropout(attn, self.dropout, training, rng)
        context = ops.matmul(attn, v)  # [h, T, dh]
        merged = ops.reshape(ops.transpose(context, (1, 0, 2)), (T, self.dim))
        return self.output.forward(merged)
