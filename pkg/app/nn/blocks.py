"""
编码器组件

每个残差模块（FFN / MHA / 卷积）只负责计算残差分支 body(x)；
ResidualUnit 按归一化方案把 body 包起来：

  pre+post     x + r * body(LN(x))，整个 block 末尾再接一个 LN
  scaled-post  LN(x + r * body(Scaling(x)))
  post         LN(x + r * body(x))
  pre          x + r * body(LN(x))
"""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.autograd import Tensor, ops
from app.errors import ShapeError
from app.nn.attention import MultiHeadAttention
from app.nn.layers import BatchNorm, Conv2d, DepthwiseConv1d, LayerNorm, Linear, PointwiseConv1d, Scaling
from app.nn.module import Module

logger = logging.getLogger(__name__)


def ceil_half(n: int) -> int:
    return -(-n // 2)


class FeedForwardModule(Module):
    def __init__(self, dim: int, expansion: int, rng: np.random.Generator, dropout: float = 0.0):
        super().__init__()
        self.dim = dim
        self.linear1 = Linear(dim, dim * expansion, rng)
        self.linear2 = Linear(dim * expansion, dim, rng)
        self.dropout = dropout

    def input_linears(self) -> List[Linear]:
        return [self.linear1]

    def body(self, x: Tensor, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ShapeError(f"feed-forward expects last dim {self.dim}, got shape {x.shape}")
        hidden = ops.dropout(ops.swish(self.linear1.forward(x)), self.dropout, training, rng)
        return self.linear2.forward(hidden)


class ConvModule(Module):
    """
    逐点扩展 C -> 2C，门控后做深度卷积、BatchNorm、Swish，再逐点投影回 C。
    GLU 把通道减半回 C；Swish 与 none 保持 2C。
    """

    def __init__(
        self,
        dim: int,
        kernel: int,
        rng: np.random.Generator,
        activation: str = "swish",
        expansion: int = 2,
        bn_eps: float = ops.BATCH_NORM_EPS,
        bn_momentum: float = 0.1,
    ):
        super().__init__()
        if kernel % 2 == 0:
            raise ShapeError(f"depthwise kernel must be odd, got {kernel}")
        if activation not in ("glu", "swish", "none"):
            raise ValueError(f"unknown conv activation: {activation}")
        self.dim = dim
        self.activation = activation
        expanded = dim * expansion
        inner = expanded // 2 if activation == "glu" else expanded
        self.inner_dim = inner
        self.pointwise1 = PointwiseConv1d(dim, expanded, rng)
        self.depthwise = DepthwiseConv1d(inner, kernel, rng)
        self.norm = BatchNorm(inner, eps=bn_eps, momentum=bn_momentum)
        self.pointwise2 = PointwiseConv1d(inner, dim, rng)

    def input_linears(self) -> List[Linear]:
        return [self.pointwise1]

    def body(self, x: Tensor, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError(f"conv module expects [T, {self.dim}], got {x.shape}")
        h = self.pointwise1.forward(x)
        if self.activation == "glu":
            h = ops.glu(h)
        elif self.activation == "swish":
            h = ops.swish(h)
        h = self.depthwise.forward(h)
        h = ops.swish(self.norm.forward(h, training))
        return self.pointwise2.forward(h)


class ResidualUnit(Module):
    """把一个残差分支按归一化方案包装起来"""

    def __init__(self, body: Module, dim: int, norm_scheme: str, residual_weight: float = 1.0,
                 dropout: float = 0.0, eps: float = ops.LAYER_NORM_EPS):
        super().__init__()
        self.body = body
        self.norm_scheme = norm_scheme
        self.residual_weight = residual_weight
        self.dropout = dropout
        self.norm = LayerNorm(dim, eps)
        if norm_scheme == "scaled-post":
            self.scaling = Scaling(dim)

    def forward(self, x: Tensor, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
        def branch(h: Tensor) -> Tensor:
            return ops.dropout(self.body.body(h, training, rng), self.dropout, training, rng)

        r = self.residual_weight
        if self.norm_scheme == "scaled-post":
            return scaled_postln_wrap(branch, x, self.scaling, self.norm, r)
        if self.norm_scheme == "post":
            return self.norm.forward(x + ops.scale(branch(x), r))
        if self.norm_scheme in ("pre", "pre+post"):
            return x + ops.scale(branch(self.norm.forward(x)), r)
        raise ValueError(f"unknown norm scheme: {self.norm_scheme}")


def ffn_forward(x: Tensor, m: FeedForwardModule, training: bool = False,
                rng: Optional[np.random.Generator] = None, residual_weight: float = 1.0) -> Tensor:
    """x + r * body(x)，不含归一化"""
    return x + ops.scale(ops.dropout(m.body(x, training, rng), m.dropout, training, rng), residual_weight)


def mha_forward(x: Tensor, m: MultiHeadAttention, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
    """残差分支输出，残差由外层包装负责"""
    return m.body(x, training, rng)


def conv_module_forward(x: Tensor, m: ConvModule, training: bool = False,
                        rng: Optional[np.random.Generator] = None) -> Tensor:
    return m.body(x, training, rng)


def scaled_postln_wrap(body: Callable[[Tensor], Tensor], x: Tensor, scaling: Scaling,
                       norm: LayerNorm, residual_weight: float = 1.0) -> Tensor:
    """LN(x + r * body(Scaling(x)))"""
    return norm.forward(x + ops.scale(body(scaling.forward(x)), residual_weight))


def merge_scaling(scaling: Scaling, weight: np.ndarray, bias: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    把 Scaling 并入后续线性层 (x @ W + b)：
    W' = diag(gamma) @ W, b' = beta @ W + b
    """
    gamma, beta = scaling.gamma.data, scaling.beta.data
    if weight.shape[0] != gamma.shape[0]:
        raise ShapeError(f"merge_scaling: linear input dim {weight.shape[0]} != scaling dim {gamma.shape[0]}")
    merged_w = gamma[:, None] * weight
    merged_b = beta @ weight
    if bias is not None:
        merged_b = merged_b + bias
    return merged_w, merged_b


class SubsamplingBlock(Module):
    """
    两层 3x3、stride 2 的二维卷积（时间 x 频率），ReLU 激活，
    展平频率轴后线性投影到模型维度。
    """

    def __init__(self, input_dim: int, dim: int, rng: np.random.Generator, kind: str = "depthwise-separable"):
        super().__init__()
        self.input_dim = input_dim
        self.dim = dim
        self.kind = kind
        self.conv1 = Conv2d(1, dim, rng)
        if kind == "vanilla":
            self.conv2 = Conv2d(dim, dim, rng)
        elif kind == "depthwise-separable":
            self.conv2 = Conv2d(dim, dim, rng, depthwise=True)
            self.conv2_pointwise = Linear(dim, dim, rng)
        else:
            raise ValueError(f"unknown subsampling kind: {kind}")
        self.freq_out = ceil_half(ceil_half(input_dim))
        self.projection = Linear(self.freq_out * dim, dim, rng)

    def forward(self, features: Tensor) -> Tensor:
        if features.ndim != 2 or features.shape[1] != self.input_dim:
            raise ShapeError(f"subsampling expects [T, {self.input_dim}] features, got {features.shape}")
        T, F = features.shape
        h = ops.relu(self.conv1.forward(ops.reshape(features, (T, F, 1))))
        h = self.conv2.forward(h)
        if self.kind == "depthwise-separable":
            h = self.conv2_pointwise.forward(h)
        h = ops.relu(h)
        t_out = h.shape[0]
        return self.projection.forward(ops.reshape(h, (t_out, self.freq_out * self.dim)))


def subsample_forward(features: Tensor, block: SubsamplingBlock) -> Tensor:
    return block.forward(features)


class TemporalResampler(Module):
    """U-Net 的时间下采样（深度可分离卷积，k=3, stride 2）与上采样（重复 x2 + 逐点）"""

    def __init__(self, dim: int, rng: np.random.Generator):
        super().__init__()
        self.down_depthwise = DepthwiseConv1d(dim, 3, rng, stride=2)
        self.down_pointwise = PointwiseConv1d(dim, dim, rng)
        self.up_pointwise = PointwiseConv1d(dim, dim, rng)


def downsample(x: Tensor, r: TemporalResampler) -> Tuple[Tensor, Tensor]:
    """返回 (降采样结果, 跳连缓存)"""
    y = r.down_pointwise.forward(r.down_depthwise.forward(x))
    return y, x


def upsample(y: Tensor, skip: Tensor, r: TemporalResampler, add_skip: bool = True) -> Tensor:
    """最近邻重复到 2*T2，截断到 T1，逐点投影后与跳连相加（add_skip=False 时只取长度）"""
    t_full = skip.shape[0]
    if y.shape[0] != ceil_half(t_full):
        raise ShapeError(f"upsample expects {ceil_half(t_full)} frames for skip length {t_full}, got {y.shape[0]}")
    repeated = ops.repeat(y, 2, axis=0)
    if repeated.shape[0] != t_full:
        repeated = repeated[:t_full]
    up = r.up_pointwise.forward(repeated)
    return up + skip if add_skip else up
