import numpy as np
import pytest
from pydantic import ValidationError

from app.schemas import SyntheticTask
from app.training.metrics import edit_distance, token_accuracy
from app.training.synthetic import gen_synthetic, stream_batches


def test_noiseless_features_repeat_each_label():
    task = SyntheticTask(noise=0.0, upsample=4, label_length=3)
    features, labels = gen_synthetic(task, 1, seed=5)[0]
    assert features.shape == (12, task.feature_dim)
    assert len({tuple(row) for row in features}) == len(set(labels))
    for i, label in enumerate(labels):
        block = features[4 * i:4 * (i + 1)]
        assert np.all(block == block[0])
        assert block[0, label] == 1.0 and block[0].sum() == 1.0


@pytest.mark.parametrize("upsample,length", [(1, 1), (3, 7), (4, 6)])
def test_feature_length(upsample, length):
    task = SyntheticTask(upsample=upsample, label_length=length)
    for features, labels in gen_synthetic(task, 5):
        assert features.shape[0] == upsample * len(labels) == upsample * length


def test_fixed_seed_is_reproducible():
    task = SyntheticTask(seed=11)
    a, b = gen_synthetic(task, 4), gen_synthetic(task, 4)
    for (fa, la), (fb, lb) in zip(a, b):
        np.testing.assert_array_equal(fa, fb)
        assert la == lb


def test_adjacent_labels_differ_by_default():
    for _, labels in gen_synthetic(SyntheticTask(vocab_size=2, label_length=10), 20):
        assert all(a != b for a, b in zip(labels, labels[1:]))


def test_labels_in_vocabulary():
    task = SyntheticTask(vocab_size=5, feature_dim=5, allow_repeats=True)
    for _, labels in gen_synthetic(task, 20):
        assert all(0 <= label < 5 for label in labels)


def test_feature_dim_must_cover_vocab():
    with pytest.raises(ValidationError):
        SyntheticTask(vocab_size=10, feature_dim=8)


def test_stream_yields_fresh_batches():
    stream = stream_batches(SyntheticTask(), batch_size=3, seed=0)
    first, second = next(stream), next(stream)
    assert len(first) == len(second) == 3
    assert not np.array_equal(first[0][0], second[0][0])


def test_edit_distance_and_accuracy():
    assert edit_distance([1, 2, 3], [1, 3]) == 1
    assert edit_distance([], [4, 5]) == 2
    assert token_accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert token_accuracy([1, 3], [1, 2, 3]) == pytest.approx(2 / 3)
    assert token_accuracy([9, 9, 9, 9, 9, 9, 9], [1]) == 0.0
    assert token_accuracy([], []) == 1.0
