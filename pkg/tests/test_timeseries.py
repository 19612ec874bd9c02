import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from beamcast.timeseries import (
    ConstantChannel,
    DegenerateSplit,
    InvalidK,
    LengthMismatch,
    TooShort,
    channelize,
    contiguous_runs,
    destandardize,
    from_array,
    kfold_partitions,
    make_supervised,
    recombine,
    rmse,
    split_train_test,
    standardize,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_channelize_definition():
    s = channelize([1 + 2j, 3 + 4j])
    np.testing.assert_array_equal(s.channels, [[1, 3], [2, 4]])
    assert not s.standardized


def test_channelize_real_signal_and_round_trip():
    s = channelize([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(s.channels[1], 0)
    z = np.array([1 + 2j, -3.5 + 0.25j, 7j])
    np.testing.assert_array_equal(recombine(channelize(z)), z)
    with pytest.raises(TooShort):
        channelize([1j])


def test_standardize_two_points():
    s = standardize(from_array([[1.0, 3.0]]))
    assert s.mean[0] == 2.0 and s.std[0] == 1.0
    np.testing.assert_array_equal(s.channels, [[-1.0, 1.0]])


def test_standardize_rejects_constant_unless_allowed():
    s = channelize([1.0, 2.0, 3.0])
    with pytest.raises(ConstantChannel):
        standardize(s)
    out = standardize(s, allow_constant=True)
    assert out.std[1] == 1.0
    np.testing.assert_array_equal(out.channels[1], 0)


@given(arrays(float, (2, 12), elements=finite))
def test_standardize_properties(x):
    x = x + np.arange(12) * np.array([[1.0], [-2.0]])  # guarantee non-constant channels
    s = standardize(from_array(x))
    np.testing.assert_allclose(s.channels.mean(axis=1), 0, atol=1e-9)
    np.testing.assert_allclose(s.channels.std(axis=1), 1, atol=1e-9)
    np.testing.assert_allclose(standardize(s).channels, s.channels, atol=1e-9)
    np.testing.assert_allclose(destandardize(s).channels, x, atol=1e-12 * max(1.0, np.abs(x).max()))


def test_test_split_uses_train_statistics():
    x = from_array(np.arange(20.0).reshape(1, 20) ** 1.5)
    train, test = split_train_test(x, 0.8)
    t_train = standardize(train)
    t_test = standardize(test, reference=train)
    np.testing.assert_array_equal(t_test.mean, t_train.mean)
    np.testing.assert_array_equal(t_test.std, t_train.std)
    np.testing.assert_allclose(t_test.channels, (test.channels - train.channels.mean()) / train.channels.std())


def test_split_examples():
    s = from_array(np.arange(361.0))
    train, test = split_train_test(s, 0.8)
    assert (len(train), len(test)) == (288, 73)
    a, b = split_train_test(from_array(np.arange(10.0)), 0.5)
    assert (len(a), len(b)) == (5, 5)
    np.testing.assert_array_equal(np.hstack([train.channels, test.channels]), s.channels)
    with pytest.raises(DegenerateSplit):
        split_train_test(from_array(np.arange(4.0)), 0.9)


def test_make_supervised():
    w = make_supervised(from_array([[1.0, 2.0, 3.0]]))
    np.testing.assert_array_equal(w.inputs.ravel(), [1, 2])
    np.testing.assert_array_equal(w.targets.ravel(), [2, 3])
    c = make_supervised(from_array(np.full((1, 5), 4.0)))
    np.testing.assert_array_equal(c.inputs, c.targets)
    assert len(make_supervised(from_array(np.zeros((2, 361))))) == 360
    with pytest.raises(TooShort):
        make_supervised(from_array([[1.0]]))


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
    with pytest.raises(LengthMismatch):
        rmse([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        rmse([], [])


@given(arrays(float, 17, elements=finite), arrays(float, 17, elements=finite))
def test_rmse_against_loop(a, b):
    acc = 0.0
    for x, y in zip(a, b):
        acc += (x - y) ** 2
    loop = math.sqrt(acc / len(a))
    assert rmse(a, b) == pytest.approx(loop, rel=1e-12, abs=1e-12)
    assert rmse(a, b) == pytest.approx(rmse(b, a), rel=1e-15, abs=0)
    assert rmse(a, b) >= 0


def test_normalized_rmse():
    a = np.array([1.0, 3.0, 1.0, 3.0])
    assert rmse(np.zeros(4), a, normalized=True) == pytest.approx(math.sqrt(5.0) / 1.0)
    assert rmse(a, a, normalized=True) == 0
    with pytest.raises(ConstantChannel):
        rmse(np.zeros(3), np.ones(3), normalized=True)


def test_rmse_over_channels_is_cellwise():
    p = np.zeros((3, 2))
    a = np.array([[1, 2], [3, 4], [5, 6]], float)
    assert rmse(p, a) == pytest.approx(math.sqrt(np.sum(a**2) / 6))


def test_kfold_examples():
    folds = kfold_partitions(10, 10, seed=0)
    assert all(len(v) == 1 for _, v in folds)
    sizes = sorted(len(v) for _, v in kfold_partitions(361, 10, seed=3))
    assert sizes == [36] * 9 + [37]
    assert sum(sizes) == 361
    with pytest.raises(InvalidK):
        kfold_partitions(5, 1)
    with pytest.raises(InvalidK):
        kfold_partitions(3, 4)


@given(st.integers(2, 400), st.integers(2, 12), st.integers(0, 10**6))
def test_kfold_partitions_index_range(T, k, seed):
    if T < k:
        return
    folds = kfold_partitions(T, k, seed)
    vals = np.concatenate([v for _, v in folds])
    assert sorted(vals.tolist()) == list(range(T))
    for train, val in folds:
        assert np.intersect1d(train, val).size == 0
        assert len(train) + len(val) == T
        assert np.all(np.diff(val) == 1)  # contiguous block


def test_contiguous_runs():
    runs = contiguous_runs([0, 1, 2, 5, 6, 9])
    assert [r.tolist() for r in runs] == [[0, 1, 2], [5, 6], [9]]
    assert contiguous_runs([]) == []
