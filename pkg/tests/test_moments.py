import numpy as np
import pytest

from streampca import StreamMoments, batch_covariance, update_covariance, update_mean
from streampca.errors import DimensionError, NonFiniteError, StreamPCAError


def test_two_point_average():
    m = StreamMoments(1, n=1, mean=np.array([2.0]))
    update_mean(m, [4.0])
    assert m.mean == pytest.approx([3.0])
    assert m.n == 2


def test_first_observation_sets_mean():
    m = StreamMoments(3)
    update_mean(m, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(m.mean, [1.0, 2.0, 3.0])


def test_mean_matches_batch(rng):
    X = rng.normal(size=(50, 8))
    m = StreamMoments(8)
    for x in X:
        update_mean(m, x)
    np.testing.assert_allclose(m.mean, X.mean(axis=0), rtol=0, atol=1e-12)


def test_forgetting_reproduces_equal_weights_bit_for_bit(rng):
    X = rng.normal(size=(10, 4))
    eq = StreamMoments(4, track_cov=True)
    update_covariance(eq, X[0])
    fg = eq.copy()
    for x in X[1:]:
        update_covariance(eq, x)
        fg.forgetting = 1.0 / (fg.n + 1)
        update_covariance(fg, x)
    np.testing.assert_array_equal(eq.mean, fg.mean)
    np.testing.assert_array_equal(eq.cov, fg.cov)


def test_constant_stream_has_zero_covariance():
    m = StreamMoments(2, track_cov=True)
    for _ in range(10):
        update_covariance(m, [1.0, 1.0])
    np.testing.assert_array_equal(m.cov, np.zeros((2, 2)))


def test_hand_evaluated_second_step():
    m = StreamMoments(1, track_cov=True)
    update_covariance(m, [0.0])
    update_covariance(m, [2.0])
    np.testing.assert_allclose(m.cov, [[1.0]])


def test_covariance_matches_batch(rng):
    X = rng.normal(size=(20, 5))
    m = StreamMoments(5, track_cov=True)
    for x in X:
        update_covariance(m, x)
    assert np.linalg.norm(m.cov - batch_covariance(X)) < 1e-12
    assert m.total_var == pytest.approx(np.trace(m.cov), rel=1e-10)


def test_total_variance_without_covariance(rng):
    X = rng.normal(size=(30, 6))
    m = StreamMoments(6)
    for x in X:
        update_mean(m, x)
    assert m.total_var == pytest.approx(np.trace(batch_covariance(X)), rel=1e-10)


def test_forgetting_discounts_history():
    m = StreamMoments(1, forgetting=0.5)
    for x in ([0.0], [0.0], [4.0]):
        update_mean(m, x)
    assert m.mean == pytest.approx([2.0])


def test_uncentered_second_moment(rng):
    X = rng.normal(size=(15, 3))
    m = StreamMoments(3, track_cov=True, centered=False)
    for x in X:
        update_covariance(m, x)
    np.testing.assert_allclose(m.cov, X.T @ X / 15, atol=1e-12)
    np.testing.assert_array_equal(m.mean, np.zeros(3))


def test_from_batch_matches_recursion(rng):
    X = rng.normal(size=(12, 4))
    m = StreamMoments(4, track_cov=True)
    for x in X:
        update_covariance(m, x)
    b = StreamMoments.from_batch(X, track_cov=True)
    np.testing.assert_allclose(b.cov, m.cov, atol=1e-12)
    assert b.n == m.n


def test_errors():
    m = StreamMoments(3)
    with pytest.raises(DimensionError):
        update_mean(m, [1.0, 2.0])
    with pytest.raises(NonFiniteError):
        update_mean(m, [1.0, np.nan, 0.0])
    with pytest.raises(StreamPCAError):
        update_covariance(m, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        StreamMoments(3, forgetting=1.5)
