"""
基础数值运算

每个运算返回一个新的 Tensor，并附带闭包形式的反向函数：
反向函数接收输出梯度，返回与输入一一对应的梯度（不需要时为 None）。
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from app.autograd.tensor import Tensor, as_tensor, make_result
from app.errors import ConfigError, ShapeError

Number = Union[int, float]

LAYER_NORM_EPS = 1e-5
BATCH_NORM_EPS = 1e-5


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度求和回原始形状"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh 形式在两端都不会溢出
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# 逐元素运算
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(out, (a, b), _backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(out, (a, b), _backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def _backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(out, (a, b), _backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def _backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return make_result(out, (a, b), _backward, "div")


def neg(a: Tensor) -> Tensor:
    def _backward(g):
        return (-g,)

    return make_result(-a.data, (a,), _backward, "neg")


def scale(a: Tensor, factor: Number) -> Tensor:
    factor = float(factor)

    def _backward(g):
        return (g * factor,)

    return make_result(a.data * factor, (a,), _backward, "scale")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def _backward(g):
        return (g * out,)

    return make_result(out, (a,), _backward, "exp")


def log(a: Tensor) -> Tensor:
    def _backward(g):
        return (g / a.data,)

    return make_result(np.log(a.data), (a,), _backward, "log")


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def _backward(g):
        return (g * s * (1.0 - s),)

    return make_result(s, (a,), _backward, "sigmoid")


def swish(a: Tensor) -> Tensor:
    """x * sigmoid(x)"""
    s = _sigmoid(a.data)
    out = a.data * s

    def _backward(g):
        return (g * (s + a.data * s * (1.0 - s)),)

    return make_result(out, (a,), _backward, "swish")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def _backward(g):
        return (g * mask,)

    return make_result(a.data * mask, (a,), _backward, "relu")


def glu(a: Tensor) -> Tensor:
    """最后一维对半切分为 (x, gate)，输出 x * sigmoid(gate)"""
    if a.shape[-1] % 2 != 0:
        raise ShapeError(f"glu needs an even last dimension, got shape {a.shape}")
    half = a.shape[-1] // 2
    x, gate = a.data[..., :half], a.data[..., half:]
    s = _sigmoid(gate)

    def _backward(g):
        return (np.concatenate([g * s, g * x * s * (1.0 - s)], axis=-1),)

    return make_result(x * s, (a,), _backward, "glu")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def _backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result(y, (a,), _backward, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def _backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (a,), _backward, "log_softmax")


# ---------------------------------------------------------------------------
# 形状与归约
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def _backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_result(out, (a, b), _backward, "matmul")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {original} into {tuple(shape)}") from exc

    def _backward(g):
        return (g.reshape(original),)

    return make_result(out, (a,), _backward, "reshape")


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))

    def _backward(g):
        return (np.transpose(g, inverse),)

    return make_result(np.transpose(a.data, axes), (a,), _backward, "transpose")


def getitem(a: Tensor, key) -> Tensor:
    out = a.data[key]

    def _backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return make_result(np.array(out, copy=True), (a,), _backward, "getitem")


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """逐元素求和，形状必须一致"""
    tensors = [as_tensor(t) for t in tensors]
    out = np.sum([t.data for t in tensors], axis=0)

    def _backward(g):
        return tuple(g for _ in tensors)

    return make_result(out, tensors, _backward, "add_n")


def repeat(a: Tensor, repeats: int, axis: int = 0) -> Tensor:
    """沿 axis 最近邻重复（每帧复制 repeats 次）"""
    axis = axis % a.ndim

    def _backward(g):
        shape = list(a.shape)
        shape.insert(axis + 1, repeats)
        return (g.reshape(shape).sum(axis=axis + 1),)

    return make_result(np.repeat(a.data, repeats, axis=axis), (a,), _backward, "repeat")


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.asarray(out, dtype=np.float64), (a,), _backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def one_hot(indices: Sequence[int], depth: int) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= depth):
        raise ShapeError(f"one_hot indices out of range [0, {depth})")
    out = np.zeros((idx.size, depth))
    out[np.arange(idx.size), idx] = 1.0
    return Tensor(out)


def embedding(table: Tensor, indices: Sequence[int]) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)

    def _backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return make_result(table.data[idx], (table,), _backward, "embedding")


# ---------------------------------------------------------------------------
# 归一化与正则
# ---------------------------------------------------------------------------

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """最后一维零均值单位方差，再做 gamma/beta 仿射"""
    if eps <= 0:
        raise ValueError(f"layer_norm eps must be positive, got {eps}")
    C = x.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"layer_norm channel mismatch: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def _backward(g):
        reduce_axes = tuple(range(x.ndim - 1))
        dxhat = g * gamma.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return make_result(out, (x, gamma, beta), _backward, "layer_norm")


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = BATCH_NORM_EPS,
) -> Tensor:
    """
    沿第 0 维（时间）做批统计归一化，x 形状为 [T, C]

    训练模式使用当前统计量并原地更新 running_mean/running_var，
    推理模式使用 running 统计量。
    """
    C = x.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"batch_norm channel mismatch: x {x.shape}, gamma {gamma.shape}")
    if not training:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean) * inv_std

        def _backward_eval(g):
            return g * gamma.data * inv_std, (g * xhat).sum(axis=0), g.sum(axis=0)

        return make_result(xhat * gamma.data + beta.data, (x, gamma, beta), _backward_eval, "batch_norm")

    mu = x.data.mean(axis=0)
    centered = x.data - mu
    var = (centered * centered).mean(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    running_mean *= (1.0 - momentum)
    running_mean += momentum * mu
    running_var *= (1.0 - momentum)
    running_var += momentum * var

    def _backward(g):
        dxhat = g * gamma.data
        dx = inv_std * (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0))
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return make_result(xhat * gamma.data + beta.data, (x, gamma, beta), _backward, "batch_norm")


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """inverted dropout；推理或 rate=0 时为恒等映射"""
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an explicit random generator", field="dropout")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def _backward(g):
        return (g * keep,)

    return make_result(x.data * keep, (x,), _backward, "dropout")


# ---------------------------------------------------------------------------
# 卷积
# ---------------------------------------------------------------------------

def same_padding(length: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """
    same 填充：输出长度 ceil(length/stride)，
    总填充量为奇数时多出的一个放在右侧
    """
    out = -(-length // stride)
    total = max((out - 1) * stride + kernel - length, 0)
    return out, total // 2, total - total // 2


def _window_index(n_out: int, kernel: int, stride: int) -> np.ndarray:
    return np.arange(n_out)[:, None] * stride + np.arange(kernel)[None, :]


def conv1d(x: Tensor, w: Tensor, stride: int = 1, mode: str = "full", padding: str = "same") -> Tensor:
    """
    时间轴上的互相关，x 形状 [T, C_in]

    mode:
      full      w 形状 [k, C_in, C_out]
      depthwise w 形状 [k, C]，每个通道一个滤波器
      pointwise w 形状 [C_in, C_out]，即 k=1
    """
    if stride < 1:
        raise ValueError(f"conv1d stride must be positive, got {stride}")
    if x.ndim != 2:
        raise ShapeError(f"conv1d expects x of shape [T, C], got {x.shape}")
    T, c_in = x.shape
    if mode == "pointwise":
        if w.ndim != 2 or w.shape[0] != c_in:
            raise ShapeError(f"conv1d channel mismatch: x {x.shape}, w {w.shape}")
        kernel = 1
    elif mode == "depthwise":
        if w.ndim != 2 or w.shape[1] != c_in:
            raise ShapeError(f"conv1d channel mismatch: x {x.shape}, w {w.shape}")
        kernel = w.shape[0]
    elif mode == "full":
        if w.ndim != 3 or w.shape[1] != c_in:
            raise ShapeError(f"conv1d channel mismatch: x {x.shape}, w {w.shape}")
        kernel = w.shape[0]
    else:
        raise ValueError(f"unknown conv1d mode: {mode}")
    if kernel < 1:
        raise ValueError("conv1d kernel size must be at least 1")

    if padding == "same":
        n_out, left, right = same_padding(T, kernel, stride)
    elif padding == "valid":
        if T < kernel:
            raise ShapeError(f"valid conv1d needs T >= kernel, got T={T}, kernel={kernel}")
        n_out, left, right = (T - kernel) // stride + 1, 0, 0
    else:
        raise ValueError(f"unknown conv1d padding: {padding}")

    xp = np.pad(x.data, ((left, right), (0, 0)))
    index = _window_index(n_out, kernel, stride)
    cols = xp[index]  # [T', k, C_in]

    if mode == "pointwise":
        out = cols[:, 0, :] @ w.data
    elif mode == "depthwise":
        out = np.einsum("tkc,kc->tc", cols, w.data)
    else:
        out = np.einsum("tkc,kco->to", cols, w.data)

    def _backward(g):
        if mode == "pointwise":
            dcols = np.zeros_like(cols)
            dcols[:, 0, :] = g @ w.data.T
            dw = cols[:, 0, :].T @ g
        elif mode == "depthwise":
            dcols = g[:, None, :] * w.data[None, :, :]
            dw = np.einsum("tkc,tc->kc", cols, g)
        else:
            dcols = np.einsum("to,kco->tkc", g, w.data)
            dw = np.einsum("tkc,to->kco", cols, g)
        dxp = np.zeros_like(xp)
        np.add.at(dxp, index, dcols)
        return dxp[left:left + T], dw

    return make_result(out, (x, w), _backward, f"conv1d_{mode}")


def conv2d(x: Tensor, w: Tensor, stride: int = 2, mode: str = "full") -> Tensor:
    """
    时间 x 频率二维互相关（same 填充），x 形状 [T, F, C_in]

    mode:
      full      w 形状 [kt, kf, C_in, C_out]
      depthwise w 形状 [kt, kf, C]
    """
    if stride < 1:
        raise ValueError(f"conv2d stride must be positive, got {stride}")
    if x.ndim != 3:
        raise ShapeError(f"conv2d expects x of shape [T, F, C], got {x.shape}")
    T, F, c_in = x.shape
    if mode == "full":
        if w.ndim != 4 or w.shape[2] != c_in:
            raise ShapeError(f"conv2d channel mismatch: x {x.shape}, w {w.shape}")
    elif mode == "depthwise":
        if w.ndim != 3 or w.shape[2] != c_in:
            raise ShapeError(f"conv2d channel mismatch: x {x.shape}, w {w.shape}")
    else:
        raise ValueError(f"unknown conv2d mode: {mode}")
    kt, kf = w.shape[0], w.shape[1]
    t_out, t_left, t_right = same_padding(T, kt, stride)
    f_out, f_left, f_right = same_padding(F, kf, stride)
    xp = np.pad(x.data, ((t_left, t_right), (f_left, f_right), (0, 0)))
    it = _window_index(t_out, kt, stride)
    jf = _window_index(f_out, kf, stride)
    index = (it[:, None, :, None], jf[None, :, None, :])
    cols = xp[index]  # [T', F', kt, kf, C_in]

    if mode == "full":
        out = np.einsum("tfabc,abco->tfo", cols, w.data)
    else:
        out = np.einsum("tfabc,abc->tfc", cols, w.data)

    def _backward(g):
        if mode == "full":
            dcols = np.einsum("tfo,abco->tfabc", g, w.data)
            dw = np.einsum("tfabc,tfo->abco", cols, g)
        else:
            dcols = g[:, :, None, None, :] * w.data[None, None, :, :, :]
            dw = np.einsum("tfabc,tfc->abc", cols, g)
        dxp = np.zeros_like(xp)
        np.add.at(dxp, index, dcols)
        return dxp[t_left:t_left + T, f_left:f_left + F], dw

    return make_result(out, (x, w), _backward, f"conv2d_{mode}")


# ---------------------------------------------------------------------------
# 注意力辅助
# ---------------------------------------------------------------------------

def rel_shift(x: Tensor) -> Tensor:
    """
    相对位置到绝对位置的移位（双向）：x 形状 [..., T, 2T-1]，
    最后一维索引 p 对应相对距离 i - j = T-1-p，输出 [..., T, T]，
    out[i, j] = x[i, T-1+j-i]。

    右侧补一列零，展平后再补 T-1 个零，reshape 成 [..., T+1, 2T-1]，
    取前 T 行、从第 T-1 列起的 T 列。
    """
    *lead, T, P = x.shape
    if P != 2 * T - 1:
        raise ShapeError(f"rel_shift expects [..., T, 2T-1], got {x.shape}")
    padded = np.concatenate([x.data, np.zeros((*lead, T, 1))], axis=-1).reshape(*lead, 2 * T * T)
    padded = np.concatenate([padded, np.zeros((*lead, T - 1))], axis=-1)
    out = padded.reshape(*lead, T + 1, P)[..., :T, T - 1:].copy()

    # 每行取到的列互不相同，反向按同一组下标散回
    index = (T - 1) + np.arange(T)[None, :] - np.arange(T)[:, None]
    index = np.broadcast_to(index, (*lead, T, T))

    def _backward(g):
        gx = np.zeros(x.shape)
        np.put_along_axis(gx, index, g, axis=-1)
        return (gx,)

    return make_result(out, (x,), _backward, "rel_shift")
