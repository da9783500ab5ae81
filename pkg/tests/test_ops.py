import math

import numpy as np
import pytest

from app.autograd import Tensor, backward, ops
from app.errors import ConfigError, ShapeError


def column(values):
    return Tensor(np.asarray(values, dtype=float).reshape(-1, 1))


# ---- conv1d ----

def test_conv1d_centered_delta_is_identity():
    x = column([1, 2, 3, 4])
    w = Tensor(np.array([0.0, 1.0, 0.0]).reshape(3, 1))
    out = ops.conv1d(x, w, stride=1, mode="depthwise")
    np.testing.assert_array_equal(out.data[:, 0], [1, 2, 3, 4])


def test_conv1d_left_tap_shifts_right():
    x = column([1, 2, 3, 4])
    w = Tensor(np.array([1.0, 0.0, 0.0]).reshape(3, 1))
    out = ops.conv1d(x, w, stride=1, mode="depthwise")
    np.testing.assert_array_equal(out.data[:, 0], [0, 1, 2, 3])


def test_conv1d_stride2_puts_extra_pad_on_the_right():
    x = column([1, 1, 1, 1])
    w = Tensor(np.ones((3, 1)))
    out = ops.conv1d(x, w, stride=2, mode="depthwise")
    np.testing.assert_array_equal(out.data[:, 0], [3, 2])


@pytest.mark.parametrize("length,stride", [(1, 1), (4, 2), (5, 2), (7, 2), (10, 3)])
def test_conv1d_same_output_length(length, stride):
    x = Tensor(np.ones((length, 2)))
    w = Tensor(np.ones((3, 2)))
    assert ops.conv1d(x, w, stride=stride, mode="depthwise").shape[0] == -(-length // stride)


def test_depthwise_then_pointwise_equals_dense(rng):
    x = rng.standard_normal((8, 4))
    w_dw = rng.standard_normal((3, 4))
    w_pw = rng.standard_normal((4, 5))
    dense = w_dw[:, :, None] * w_pw[None, :, :]
    separable = ops.conv1d(ops.conv1d(Tensor(x), Tensor(w_dw), mode="depthwise"), Tensor(w_pw), mode="pointwise")
    full = ops.conv1d(Tensor(x), Tensor(dense), mode="full")
    assert np.max(np.abs(separable.data - full.data)) < 1e-12


def test_conv1d_valid_padding():
    x = column([1, 2, 3, 4])
    w = Tensor(np.ones((3, 1)))
    np.testing.assert_array_equal(ops.conv1d(x, w, mode="depthwise", padding="valid").data[:, 0], [6, 9])


def test_conv1d_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        ops.conv1d(Tensor(np.ones((4, 2))), Tensor(np.ones((3, 3))), mode="depthwise")


def test_conv1d_rejects_nonpositive_stride():
    with pytest.raises(ValueError):
        ops.conv1d(Tensor(np.ones((4, 2))), Tensor(np.ones((3, 2))), stride=0, mode="depthwise")


def test_conv2d_halves_time_and_frequency(rng):
    x = Tensor(rng.standard_normal((7, 9, 1)))
    w = Tensor(rng.standard_normal((3, 3, 1, 4)))
    assert ops.conv2d(x, w, stride=2).shape == (4, 5, 4)


def test_conv2d_depthwise_then_pointwise_equals_dense(rng):
    x = rng.standard_normal((6, 5, 3))
    w_dw = rng.standard_normal((3, 3, 3))
    w_pw = rng.standard_normal((3, 2))
    dense = w_dw[:, :, :, None] * w_pw[None, None, :, :]
    separable = ops.matmul(ops.conv2d(Tensor(x), Tensor(w_dw), mode="depthwise"), Tensor(w_pw))
    full = ops.conv2d(Tensor(x), Tensor(dense), mode="full")
    assert np.max(np.abs(separable.data - full.data)) < 1e-12


# ---- normalization ----

def test_layer_norm_closed_form():
    out = ops.layer_norm(Tensor([[1.0, 2.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)), eps=1e-12)
    np.testing.assert_allclose(out.data[0], [-math.sqrt(1.5), 0.0, math.sqrt(1.5)], atol=1e-9)


def test_layer_norm_rows_have_zero_mean_unit_variance(rng):
    x = rng.standard_normal((6, 16)) * 4.0 + 3.0
    out = ops.layer_norm(Tensor(x), Tensor(np.ones(16)), Tensor(np.zeros(16)), eps=1e-12).data
    assert np.max(np.abs(out.mean(axis=-1))) < 1e-10
    assert np.max(np.abs(out.var(axis=-1) - 1.0)) < 1e-8


def test_layer_norm_constant_row_is_zero():
    out = ops.layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, np.zeros((1, 3)))


def test_layer_norm_zero_gamma_gives_beta(rng):
    beta = np.array([0.5, -1.0, 2.0])
    out = ops.layer_norm(Tensor(rng.standard_normal((4, 3))), Tensor(np.zeros(3)), Tensor(beta))
    np.testing.assert_array_equal(out.data, np.tile(beta, (4, 1)))


def test_layer_norm_channel_mismatch():
    with pytest.raises(ShapeError):
        ops.layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(4)), Tensor(np.zeros(4)))


def test_batch_norm_updates_running_stats_only_in_training(rng):
    x = Tensor(rng.standard_normal((10, 2)) * 3.0 + 1.0)
    mean, var = np.zeros(2), np.ones(2)
    ops.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), mean, var, training=False)
    np.testing.assert_array_equal(mean, np.zeros(2))
    out = ops.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), mean, var, training=True, momentum=0.5)
    np.testing.assert_allclose(out.data.mean(axis=0), np.zeros(2), atol=1e-12)
    np.testing.assert_allclose(mean, 0.5 * x.data.mean(axis=0))


# ---- activations ----

def test_swish_values():
    out = ops.swish(Tensor([0.0, 1.0, -20.0])).data
    assert out[0] == 0.0
    assert out[1] == pytest.approx(0.731059, abs=1e-6)
    assert out[2] == pytest.approx(-4.12e-8, rel=1e-2)


def test_glu_gate():
    assert ops.glu(Tensor([3.0, 0.0])).data[0] == pytest.approx(1.5)
    assert ops.glu(Tensor([2.5, 50.0])).data[0] == pytest.approx(2.5)
    assert ops.glu(Tensor([2.5, -50.0])).data[0] == pytest.approx(0.0, abs=1e-20)


def test_glu_needs_even_channels():
    with pytest.raises(ShapeError):
        ops.glu(Tensor([1.0, 2.0, 3.0]))


def test_softmax_rows_sum_to_one(rng):
    out = ops.softmax(Tensor(rng.standard_normal((4, 6)) * 10), axis=-1)
    np.testing.assert_allclose(out.data.sum(axis=-1), np.ones(4), atol=1e-12)


def test_softmax_is_shift_invariant(rng):
    x = rng.standard_normal((3, 5))
    shifted = x + rng.standard_normal((3, 1)) * 50.0
    a = ops.softmax(Tensor(x), axis=-1).data
    b = ops.softmax(Tensor(shifted), axis=-1).data
    assert np.max(np.abs(a - b)) < 1e-9


def test_log_softmax_is_stable():
    out = ops.log_softmax(Tensor([[1000.0, 0.0]]))
    assert np.all(np.isfinite(out.data))
    assert out.data[0, 0] == pytest.approx(0.0)


def test_dropout_is_identity_in_eval(rng):
    x = Tensor(rng.standard_normal((3, 3)))
    assert ops.dropout(x, 0.5, training=False, rng=None) is x


def test_dropout_in_training_needs_generator():
    with pytest.raises(ConfigError):
        ops.dropout(Tensor(np.ones((2, 2))), 0.5, training=True, rng=None)


def test_dropout_same_seed_same_mask():
    x = Tensor(np.ones((4, 4)))
    a = ops.dropout(x, 0.5, training=True, rng=np.random.default_rng(1)).data
    b = ops.dropout(x, 0.5, training=True, rng=np.random.default_rng(1)).data
    np.testing.assert_array_equal(a, b)


# ---- attention helpers ----

def test_rel_shift_aligns_relative_distance():
    T = 4
    # 第 p 列编码相对距离 T-1-p，覆盖 T-1 ... -(T-1)
    x = Tensor(np.tile(np.arange(T - 1, -T, -1, dtype=float), (T, 1)))
    out = ops.rel_shift(x).data
    for i in range(T):
        for j in range(T):
            assert out[i, j] == i - j


def test_rel_shift_with_heads(rng):
    T = 3
    x = rng.standard_normal((2, T, 2 * T - 1))
    out = ops.rel_shift(Tensor(x)).data
    assert out.shape == (2, T, T)
    for h in range(2):
        for i in range(T):
            for j in range(T):
                assert out[h, i, j] == x[h, i, T - 1 - i + j]


def test_rel_shift_rows_are_independent(rng):
    x = rng.standard_normal((4, 7))
    before = ops.rel_shift(Tensor(x)).data
    x[2] += 1.0
    after = ops.rel_shift(Tensor(x)).data
    np.testing.assert_array_equal(np.delete(after, 2, axis=0), np.delete(before, 2, axis=0))


def test_rel_shift_single_frame():
    np.testing.assert_array_equal(ops.rel_shift(Tensor([[5.0]])).data, [[5.0]])


def test_rel_shift_rejects_square_input():
    with pytest.raises(ShapeError):
        ops.rel_shift(Tensor(np.zeros((3, 3))))


def test_repeat_nearest_neighbour():
    out = ops.repeat(Tensor([[1.0], [2.0]]), 2, axis=0)
    np.testing.assert_array_equal(out.data[:, 0], [1, 1, 2, 2])


# ---- lookup ----

def test_one_hot_rows():
    np.testing.assert_array_equal(ops.one_hot([2, 0], 3).data, [[0, 0, 1], [1, 0, 0]])


def test_one_hot_rejects_out_of_range():
    with pytest.raises(ShapeError):
        ops.one_hot([3], 3)


def test_embedding_accumulates_repeated_rows(rng):
    table = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    out = ops.embedding(table, [1, 3, 1])
    np.testing.assert_array_equal(out.data, table.data[[1, 3, 1]])
    backward(ops.sum(out))
    np.testing.assert_array_equal(table.grad, [[0, 0], [2, 2], [0, 0], [1, 1]])
