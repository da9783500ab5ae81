import numpy as np
import pytest

from app.autograd import Tensor, gradcheck, ops


def param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return ops.sum(out * Tensor(weights))


CASES = {
    "swish": lambda t: ops.swish(t[0]),
    "sigmoid": lambda t: ops.sigmoid(t[0]),
    "glu": lambda t: ops.glu(t[0]),
    "softmax": lambda t: ops.softmax(t[0], axis=-1),
    "log_softmax": lambda t: ops.log_softmax(t[0], axis=-1),
    "exp": lambda t: ops.exp(ops.scale(t[0], 0.3)),
    "div": lambda t: ops.div(t[0], ops.exp(t[0])),
    "rel_shift": lambda t: ops.rel_shift(ops.reshape(t[0][:3], (2, 2, 3))),
    "repeat": lambda t: ops.repeat(t[0], 2, axis=0),
    "transpose": lambda t: ops.transpose(ops.reshape(t[0], (2, 2, 4)), (1, 0, 2)),
    "getitem": lambda t: t[0][1:3],
    "embedding": lambda t: ops.embedding(t[0], [2, 0, 2, 3]),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_unary_ops(name, rng):
    x = param(rng, 4, 4)
    fn = CASES[name]
    out_shape = fn([x]).shape
    weights = rng.standard_normal(out_shape)
    result = gradcheck(lambda: weighted(fn([x]), weights), [x])
    assert result.passed(), result.per_input


def test_broadcast_matmul(rng):
    a = param(rng, 2, 3, 4)
    b = param(rng, 4, 5)
    bias = param(rng, 5)
    weights = rng.standard_normal((2, 3, 5))
    result = gradcheck(lambda: weighted(ops.matmul(a, b) + bias, weights), [a, b, bias])
    assert result.passed(), result.per_input


def test_layer_norm(rng):
    x, gamma, beta = param(rng, 5, 6), param(rng, 6), param(rng, 6)
    weights = rng.standard_normal((5, 6))
    result = gradcheck(lambda: weighted(ops.layer_norm(x, gamma, beta), weights), [x, gamma, beta])
    assert result.passed(), result.per_input


@pytest.mark.parametrize("training", [True, False])
def test_batch_norm(training, rng):
    x, gamma, beta = param(rng, 7, 3), param(rng, 3), param(rng, 3)
    mean, var = np.zeros(3), np.ones(3)
    weights = rng.standard_normal((7, 3))

    def loss():
        return weighted(ops.batch_norm(x, gamma, beta, mean, var, training=training), weights)

    result = gradcheck(loss, [x, gamma, beta])
    assert result.passed(), result.per_input


@pytest.mark.parametrize("mode,w_shape", [("full", (3, 3, 2)), ("depthwise", (5, 3)), ("pointwise", (3, 2))])
@pytest.mark.parametrize("stride", [1, 2])
def test_conv1d(mode, w_shape, stride, rng):
    x, w = param(rng, 7, 3), param(rng, *w_shape)
    weights = rng.standard_normal(ops.conv1d(x, w, stride=stride, mode=mode).shape)
    result = gradcheck(lambda: weighted(ops.conv1d(x, w, stride=stride, mode=mode), weights), [x, w])
    assert result.passed(), result.per_input


@pytest.mark.parametrize("mode,w_shape", [("full", (3, 3, 2, 3)), ("depthwise", (3, 3, 2))])
def test_conv2d(mode, w_shape, rng):
    x, w = param(rng, 5, 6, 2), param(rng, *w_shape)
    weights = rng.standard_normal(ops.conv2d(x, w, mode=mode).shape)
    result = gradcheck(lambda: weighted(ops.conv2d(x, w, mode=mode), weights), [x, w])
    assert result.passed(), result.per_input


def test_composed_expression(rng):
    x, w = param(rng, 6, 4), param(rng, 4, 4)
    weights = rng.standard_normal((6, 2))

    def loss():
        h = ops.swish(ops.matmul(x, w))
        return weighted(ops.glu(ops.layer_norm(h, Tensor(np.ones(4)), Tensor(np.zeros(4)))), weights)

    result = gradcheck(loss, [x, w])
    assert result.passed(), result.per_input


def test_gradcheck_detects_a_wrong_gradient(rng):
    x = param(rng, 3)

    def broken_square(t: Tensor) -> Tensor:
        from app.autograd.tensor import make_result
        return make_result(t.data ** 2, (t,), lambda g: (g * t.data,), "broken")

    result = gradcheck(lambda: ops.sum(broken_square(x)), [x])
    assert not result.passed()


def test_max_coords_limits_sampling(rng):
    x = param(rng, 10, 10)
    result = gradcheck(lambda: ops.sum(ops.swish(x)), [x], max_coords=7)
    assert result.checked == 7


def test_gradients_below_floor_are_judged_absolutely():
    x = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)

    def tiny_half_gradient(t: Tensor) -> Tensor:
        from app.autograd.tensor import make_result
        # 正确梯度是 2e-8 * t，这里只给一半
        return make_result(1e-8 * t.data ** 2, (t,), lambda g: (g * 1e-8 * t.data,), "tiny")

    def loss():
        return ops.sum(tiny_half_gradient(x))

    assert gradcheck(loss, [x]).passed()
    assert not gradcheck(loss, [x], floor=1e-12).passed()
