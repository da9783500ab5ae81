"""
基础层

线性层权重布局为 [in, out]，前向为 x @ W + b；
逐点卷积与线性层等价，权重布局相同，方便 Scaling 合并。
"""
from typing import Optional, Tuple

import numpy as np

from app.autograd import Tensor, ops
from app.errors import ShapeError
from app.nn.module import Module, ones, trunc_normal, zeros


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = trunc_normal(rng, (in_features, out_features), in_features)
        self.bias: Optional[Tensor] = zeros((out_features,)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"linear expects last dim {self.in_features}, got shape {x.shape}")
        y = ops.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class PointwiseConv1d(Linear):
    """k=1 的时间卷积"""

    def forward(self, x: Tensor) -> Tensor:
        y = ops.conv1d(x, self.weight, stride=1, mode="pointwise")
        return y + self.bias if self.bias is not None else y


class DepthwiseConv1d(Module):
    """每个通道一个长度为 kernel 的滤波器，带偏置"""

    def __init__(self, channels: int, kernel: int, rng: np.random.Generator, stride: int = 1):
        super().__init__()
        self.channels = channels
        self.kernel = kernel
        self.stride = stride
        self.weight = trunc_normal(rng, (kernel, channels), kernel)
        self.bias = zeros((channels,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, stride=self.stride, mode="depthwise") + self.bias


class Conv2d(Module):
    """时间 x 频率卷积，输入 [T, F, C_in]，same 填充"""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        kernel: Tuple[int, int] = (3, 3),
        stride: int = 2,
        depthwise: bool = False,
    ):
        super().__init__()
        self.stride = stride
        self.depthwise = depthwise
        kt, kf = kernel
        if depthwise:
            if in_channels != out_channels:
                raise ShapeError(f"depthwise conv2d needs C_in == C_out, got {in_channels} and {out_channels}")
            self.weight = trunc_normal(rng, (kt, kf, in_channels), kt * kf)
        else:
            self.weight = trunc_normal(rng, (kt, kf, in_channels, out_channels), kt * kf * in_channels)
        self.bias = zeros((out_channels,))

    def forward(self, x: Tensor) -> Tensor:
        mode = "depthwise" if self.depthwise else "full"
        return ops.conv2d(x, self.weight, stride=self.stride, mode=mode) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = ops.LAYER_NORM_EPS):
        super().__init__()
        self.eps = eps
        self.gamma = ones((dim,))
        self.beta = zeros((dim,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class Scaling(Module):
    """逐通道仿射 gamma * x + beta，初始为恒等映射"""

    def __init__(self, dim: int):
        super().__init__()
        self.gamma = ones((dim,))
        self.beta = zeros((dim,))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.gamma.shape[0]:
            raise ShapeError(f"scaling expects last dim {self.gamma.shape[0]}, got shape {x.shape}")
        return x * self.gamma + self.beta

    def reset(self) -> None:
        self.gamma.data[...] = 1.0
        self.beta.data[...] = 0.0


class BatchNorm(Module):
    """沿时间轴做批统计归一化；推理时使用 running 统计量"""

    def __init__(self, dim: int, eps: float = ops.BATCH_NORM_EPS, momentum: float = 0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = ones((dim,))
        self.beta = zeros((dim,))
        self.register_buffer("running_mean", np.zeros(dim))
        self.register_buffer("running_var", np.ones(dim))

    def forward(self, x: Tensor, training: bool) -> Tensor:
        return ops.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training=training, momentum=self.momentum, eps=self.eps,
        )
