"""
有限差分梯度检查

中心差分 (f(x+h) - f(x-h)) / 2h 与反向传播结果逐元素比较，
相对误差定义为 |a - n| / max(|a|, |n|, floor)。
|a| 与 |n| 都小于 floor（默认 1e-3）时分母固定为 floor，实际上按绝对误差 |a - n| / floor 判断；
所以接近零的梯度只要求绝对误差小于 rtol * floor。
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from app.autograd.tensor import Tensor, grad
from app.config import settings

logger = logging.getLogger(__name__)


class GradcheckResult(BaseModel):
    max_rel_error: float
    max_abs_error: float
    checked: int
    per_input: Dict[str, float]

    def passed(self, rtol: Optional[float] = None) -> bool:
        return self.max_rel_error < (rtol if rtol is not None else settings.GRADCHECK_RTOL)


def gradcheck(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    names: Optional[Sequence[str]] = None,
    h: Optional[float] = None,
    floor: Optional[float] = None,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> GradcheckResult:
    """
    fn 每次调用都重新计算标量损失；inputs 的 data 会被临时原地扰动。

    max_coords 限制每个输入检查的坐标数量（随机抽样），用于大模型。
    """
    h = h if h is not None else settings.GRADCHECK_STEP
    floor = floor if floor is not None else settings.GRADCHECK_FLOOR
    names = list(names) if names is not None else [f"input{i}" for i in range(len(inputs))]
    rng = np.random.default_rng(seed)
    for tensor in inputs:
        # 原地扰动依赖连续内存的 reshape 视图
        if not tensor.data.flags.c_contiguous or not tensor.data.flags.writeable:
            tensor.data = np.array(tensor.data, copy=True, order="C")

    analytic = grad(fn(), inputs)

    worst_rel, worst_abs, checked = 0.0, 0.0, 0
    per_input: Dict[str, float] = {}
    for name, tensor, g in zip(names, inputs, analytic):
        flat = tensor.data.reshape(-1)
        coords: List[int] = list(range(flat.size))
        if max_coords is not None and flat.size > max_coords:
            coords = sorted(rng.choice(flat.size, size=max_coords, replace=False).tolist())
        g_flat = g.reshape(-1)
        input_worst = 0.0
        for i in coords:
            original = flat[i]
            flat[i] = original + h
            plus = fn().item()
            flat[i] = original - h
            minus = fn().item()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            abs_err = abs(g_flat[i] - numeric)
            rel_err = abs_err / max(abs(g_flat[i]), abs(numeric), floor)
            input_worst = max(input_worst, rel_err)
            worst_abs = max(worst_abs, abs_err)
            checked += 1
        per_input[name] = input_worst
        worst_rel = max(worst_rel, input_worst)

    logger.debug(f"gradcheck: {checked} coords, max rel err {worst_rel:.3e}")
    return GradcheckResult(
        max_rel_error=worst_rel, max_abs_error=worst_abs, checked=checked, per_input=per_input
    )
