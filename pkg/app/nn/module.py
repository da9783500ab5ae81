"""
参数容器

Module 通过属性赋值自动登记参数（requires_grad 的 Tensor）和子模块；
运行统计量（BatchNorm 的 running_mean/var）用 register_buffer 显式登记。
"""
import logging
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from app.autograd import Tensor
from app.errors import CheckpointError

logger = logging.getLogger(__name__)


class Module:
    def __init__(self):
        object.__setattr__(self, "_parameters", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", False)

    def __setattr__(self, name: str, value) -> None:
        if isinstance(value, Tensor) and value.requires_grad:
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def add_module(self, name: str, module: "Module") -> None:
        self._modules[name] = module
        object.__setattr__(self, name, module)

    # ---- 遍历 ----
    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for path, module in self.named_modules(prefix):
            for name, param in module._parameters.items():
                yield (f"{path}.{name}" if path else name), param

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for path, module in self.named_modules(prefix):
            for name, buf in module._buffers.items():
                yield (f"{path}.{name}" if path else name), buf

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        for _, module in self.named_modules():
            object.__setattr__(module, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    # ---- 状态读写 ----
    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: buf.copy() for name, buf in self.named_buffers()})
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        own_params = dict(self.named_parameters())
        own_buffers = dict(self.named_buffers())
        expected = set(own_params) | set(own_buffers)
        if strict:
            missing = sorted(expected - set(state))
            unexpected = sorted(set(state) - expected)
            if missing or unexpected:
                raise CheckpointError(f"state mismatch: missing={missing[:5]}, unexpected={unexpected[:5]}")
        for name, value in state.items():
            target = own_params[name].data if name in own_params else own_buffers.get(name)
            if target is None:
                continue
            if target.shape != value.shape:
                raise CheckpointError(f"shape mismatch for {name}: expected {target.shape}, got {value.shape}")
            # 原地写入，保持参数对象身份不变
            target[...] = value
        logger.debug(f"loaded {len(state)} arrays")


def trunc_normal(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    """截断正态初始化：std = 1/sqrt(fan_in)，超出 2 个标准差的样本重新抽取"""
    std = 1.0 / np.sqrt(max(fan_in, 1))
    values = rng.standard_normal(shape)
    outside = np.abs(values) > 2.0
    while outside.any():
        values[outside] = rng.standard_normal(int(outside.sum()))
        outside = np.abs(values) > 2.0
    return Tensor(values * std, requires_grad=True)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def ones(shape) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True)
