"""
张量与反向模式自动微分

Tensor 包装一个 float64 的 numpy 数组，并记录产生它的运算；
backward() 按拓扑序反向遍历计算图，把梯度累加到叶子张量的 grad 上。
"""
import contextlib
import itertools
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.errors import GradientError

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_enabled = True
_ids = itertools.count()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """推理时关闭计算图记录"""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """稠密 n 维 float64 张量，可选梯度槽"""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_op", "_id")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _parents: Tuple["Tensor", ...] = (),
        _backward: Optional[BackwardFn] = None,
        _op: str = "leaf",
    ):
        self.data = np.array(data, dtype=np.float64) if not isinstance(data, np.ndarray) or data.dtype != np.float64 else data
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._op = _op
        self._id = next(_ids)

    # ---- 基本属性 ----
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def op(self) -> str:
        return self._op

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise GradientError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def backward(self) -> None:
        backward(self)

    def __deepcopy__(self, memo) -> "Tensor":
        # 拷贝只保留数值，新张量拿到新的节点 id
        clone = Tensor(self.data.copy(), requires_grad=self.requires_grad, name=self.name)
        memo[id(self)] = clone
        return clone

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    # ---- 运算符，具体实现见 ops ----
    def __add__(self, other):
        from app.autograd import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from app.autograd import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from app.autograd import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from app.autograd import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from app.autograd import ops
        return ops.div(self, other)

    def __neg__(self):
        from app.autograd import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from app.autograd import ops
        return ops.matmul(self, other)

    def __getitem__(self, key):
        from app.autograd import ops
        return ops.getitem(self, key)

    def reshape(self, *shape):
        from app.autograd import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from app.autograd import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False):
        from app.autograd import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from app.autograd import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    """创建运算结果；只有在需要梯度时才把节点挂进计算图"""
    needs_grad = _grad_enabled and any(p.requires_grad for p in parents)
    if not needs_grad:
        return Tensor(data, _op=op)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward_fn, _op=op)


class GraphNode:
    __slots__ = ("node_id", "op", "inputs", "tensor")

    def __init__(self, node_id: int, op: str, inputs: Tuple[int, ...], tensor: Tensor):
        self.node_id = node_id
        self.op = op
        self.inputs = inputs
        self.tensor = tensor


class ComputeGraph:
    """从标量损失出发收集到的计算图，节点按拓扑序排列（输入在前）"""

    def __init__(self, nodes: List[GraphNode]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "ComputeGraph":
        order: List[Tensor] = []
        visited = set()
        # 迭代式 DFS，避免深图触发递归上限
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if tensor._id in visited or not tensor.requires_grad:
                continue
            visited.add(tensor._id)
            stack.append((tensor, True))
            for parent in tensor._parents:
                if parent._id not in visited and parent.requires_grad:
                    stack.append((parent, False))
        nodes = [
            GraphNode(t._id, t._op, tuple(p._id for p in t._parents), t)
            for t in order
        ]
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> List[Tensor]:
        return [n.tensor for n in self.nodes if n.tensor.is_leaf]

    def run_backward(self, root: Tensor, seed: np.ndarray) -> Dict[int, np.ndarray]:
        """反向遍历，每个节点恰好访问一次，返回各节点的梯度"""
        grads: Dict[int, np.ndarray] = {root._id: seed}
        for node in reversed(self.nodes):
            tensor = node.tensor
            g = grads.get(tensor._id)
            if g is None or tensor.is_leaf:
                continue
            parent_grads = tensor._backward(g)
            for parent, pg in zip(tensor._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if parent._id in grads:
                    grads[parent._id] = grads[parent._id] + pg
                else:
                    grads[parent._id] = pg
        return grads


def _check_scalar(loss: Tensor) -> None:
    if loss.size != 1:
        raise GradientError(f"backward() requires a scalar loss, got shape {loss.shape}")


def backward(
    loss: Tensor,
    inputs: Optional[Sequence[Tensor]] = None,
    graph: Optional[ComputeGraph] = None,
) -> ComputeGraph:
    """
    把梯度写入所有可达叶子张量的 grad（累加语义）。

    inputs 中与 loss 不连通、grad 仍为空的张量得到全零梯度。
    """
    _check_scalar(loss)
    for t in inputs or ():
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
    if not loss.requires_grad:
        return ComputeGraph([])
    graph = graph or ComputeGraph.trace(loss)
    grads = graph.run_backward(loss, np.ones_like(loss.data))
    for leaf in graph.leaves():
        g = grads.get(leaf._id)
        if g is None:
            continue
        if leaf.grad is None:
            leaf.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            leaf.grad = leaf.grad + g
    return graph


def grad(loss: Tensor, inputs: Sequence[Tensor]) -> List[np.ndarray]:
    """返回 loss 对 inputs 的梯度；与 loss 不连通的输入梯度为 0"""
    _check_scalar(loss)
    if not loss.requires_grad:
        return [np.zeros_like(t.data) for t in inputs]
    graph = ComputeGraph.trace(loss)
    grads = graph.run_backward(loss, np.ones_like(loss.data))
    return [np.array(grads[t._id], copy=True) if t._id in grads else np.zeros_like(t.data) for t in inputs]
