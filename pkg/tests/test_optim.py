import numpy as np
import pytest

from app.autograd import Tensor, backward, ops
from app.errors import ShapeError
from app.schemas import OptimizerParams
from app.training.optim import AdamW, AdamWState, adamw_step, clip_grad_norm


def test_zero_grads_without_decay_leave_params(rng):
    params = [rng.standard_normal((3, 2)), rng.standard_normal(4)]
    before = [p.copy() for p in params]
    state = AdamWState.zeros_like(params)
    adamw_step(params, [np.zeros_like(p) for p in params], state, lr=0.1, weight_decay=0.0)
    for p, b in zip(params, before):
        np.testing.assert_array_equal(p, b)
    assert state.step == 1


def test_zero_grads_with_decay_shrink_params(rng):
    params = [rng.standard_normal(5)]
    before = params[0].copy()
    adamw_step(params, [np.zeros(5)], AdamWState.zeros_like(params), lr=0.1, weight_decay=0.01)
    np.testing.assert_allclose(params[0], before * (1 - 0.1 * 0.01), rtol=0, atol=1e-15)


def test_first_step_moves_by_lr_times_sign():
    params = [np.array([1.0, -1.0])]
    adamw_step(params, [np.array([0.5, -2.0])], AdamWState.zeros_like(params), lr=0.01, eps=0.0)
    np.testing.assert_allclose(params[0], [0.99, -0.99])


def test_shape_mismatch_raises():
    params = [np.zeros(3)]
    with pytest.raises(ShapeError):
        adamw_step(params, [np.zeros(4)], AdamWState.zeros_like(params), lr=0.1)


def test_quadratic_converges():
    w = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    target = np.array([1.0, 2.0])
    opt = AdamW([w], OptimizerParams(weight_decay=0.0))
    steps = 500
    for step in range(steps):
        opt.zero_grad()
        diff = w - Tensor(target)
        backward(ops.sum(diff * diff))
        opt.step(0.1 * (1 - step / steps))
    np.testing.assert_allclose(w.data, target, atol=5e-2)


def test_missing_gradient_only_decays():
    used = Tensor(np.ones(2), requires_grad=True)
    unused = Tensor(np.ones(2), requires_grad=True)
    opt = AdamW([used, unused], OptimizerParams(weight_decay=0.1))
    backward(ops.sum(used * used))
    opt.step(0.5)
    np.testing.assert_allclose(unused.data, np.ones(2) * (1 - 0.05))
    assert np.all(used.data < 0.95)


def test_clip_grad_norm():
    a = Tensor(np.zeros(2), requires_grad=True)
    b = Tensor(np.zeros(1), requires_grad=True)
    a.grad, b.grad = np.array([3.0, 0.0]), np.array([4.0])
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose(a.grad, [0.6, 0.0])
    np.testing.assert_allclose(b.grad, [0.8])


def test_clip_grad_norm_below_threshold_is_noop():
    a = Tensor(np.zeros(2), requires_grad=True)
    a.grad = np.array([0.3, 0.4])
    clip_grad_norm([a], 1.0)
    np.testing.assert_array_equal(a.grad, [0.3, 0.4])
