import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import mahalanobis as scipy_mahalanobis
from scipy.stats import multivariate_normal

from gmmstream import ClusterSignature, DegenerateCovariance, DimensionError, entropy, mahalanobis, merge_signatures
from gmmstream.gaussian import DEFAULT_FLOOR, regularize

from conftest import random_spd, sig

LOG2_2PIE = np.log2(2 * np.pi * np.e)


def test_entropy_identity():
    assert entropy(np.eye(2)) == pytest.approx(LOG2_2PIE, abs=1e-12)
    assert entropy(np.eye(2)) == pytest.approx(4.0942, abs=1e-4)


def test_entropy_scaled_identity():
    assert entropy(4 * np.eye(2)) == pytest.approx(LOG2_2PIE + 2.0, abs=1e-12)
    assert entropy(4 * np.eye(2)) == pytest.approx(6.0942, abs=1e-4)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_entropy_matches_scipy(rng, d):
    cov = random_spd(rng, d)
    nats = multivariate_normal(mean=np.zeros(d), cov=cov).entropy()
    assert entropy(cov) == pytest.approx(nats / np.log(2), rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 4])
def test_entropy_scaling(rng, d):
    cov = random_spd(rng, d)
    s = 3.7
    assert entropy(s ** 2 * cov) == pytest.approx(entropy(cov) + d * np.log2(s), abs=1e-10)


def test_entropy_can_be_negative():
    assert entropy(1e-6 * np.eye(2)) < 0


def test_entropy_rejects_singular():
    with pytest.raises(DegenerateCovariance):
        entropy(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(DegenerateCovariance):
        entropy(np.array([[np.nan, 0], [0, 1.0]]))


def test_mahalanobis_examples():
    s = sig(0, [0, 0], np.eye(2), 5)
    assert mahalanobis([0, 0], s) == 0.0
    assert mahalanobis([3, 0], s) == pytest.approx(3.0)
    s = sig(0, [0, 0], np.diag([4.0, 1.0]), 5)
    assert mahalanobis([2, 0], s) == pytest.approx(1.0)


def test_mahalanobis_matches_scipy(rng):
    cov = random_spd(rng, 3)
    mean = rng.normal(size=3)
    s = sig(0, mean, cov, 10)
    for _ in range(20):
        x = rng.normal(size=3) * 4
        assert mahalanobis(x, s) == pytest.approx(scipy_mahalanobis(x, mean, np.linalg.inv(cov)), rel=1e-10)


def test_mahalanobis_dimension_mismatch():
    with pytest.raises(DimensionError):
        mahalanobis([1, 2, 3], sig(0, [0, 0], np.eye(2), 3))


def test_mahalanobis_singular_needs_regularization():
    s = ClusterSignature.from_points([[1.0, 1.0]])
    with pytest.raises(DegenerateCovariance):
        mahalanobis([2.0, 1.0], s)
    assert np.isfinite(mahalanobis([2.0, 1.0], s, epsilon_scale=1e-6))


def test_regularize_examples():
    np.testing.assert_allclose(regularize(np.eye(3), 1e-6), (1 + 1e-6) * np.eye(3), rtol=0, atol=1e-15)
    np.testing.assert_array_equal(regularize(np.zeros((2, 2)), 1e-6), DEFAULT_FLOOR * np.eye(2))
    assert np.linalg.det(regularize(np.array([[1.0, 1.0], [1.0, 1.0]]), 1e-6)) > 0


def test_regularize_does_not_modify_input():
    cov = np.eye(2)
    regularize(cov, 0.5)
    np.testing.assert_array_equal(cov, np.eye(2))


def test_from_points_population_statistics(rng):
    pts = rng.normal(size=(17, 3))
    s = ClusterSignature.from_points(pts, id=4, chunk_index=2)
    np.testing.assert_allclose(s.mean, pts.mean(axis=0))
    np.testing.assert_allclose(s.covariance, np.cov(pts.T, bias=True))
    assert s.growth_log == [(2, 17)] and s.created_at_chunk == 2 and s.id == 4


def test_signature_validation():
    with pytest.raises(DimensionError):
        ClusterSignature(0, 3, np.zeros(2), np.eye(3))
    with pytest.raises(ValueError):
        ClusterSignature(0, 0, np.zeros(2), np.eye(2))


def test_merge_identical():
    a = sig(0, [1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]], 8)
    m = merge_signatures(a, a.copy())
    assert m.num_points == 16
    np.testing.assert_allclose(m.mean, a.mean, atol=1e-15)
    np.testing.assert_allclose(m.covariance, a.covariance, atol=1e-15)


def test_merge_equal_counts_midpoint():
    a = sig(0, [0.0, 0.0], np.eye(2), 10)
    b = sig(1, [4.0, -2.0], np.eye(2), 10)
    np.testing.assert_allclose(merge_signatures(a, b).mean, [2.0, -1.0])


def test_merge_matches_pooled_small(rng):
    x, y = rng.normal(size=(5, 2)), rng.normal(loc=3, size=(7, 2))
    m = merge_signatures(ClusterSignature.from_points(x), ClusterSignature.from_points(y))
    pooled = ClusterSignature.from_points(np.vstack([x, y]))
    np.testing.assert_allclose(m.mean, pooled.mean, rtol=1e-9)
    np.testing.assert_allclose(m.covariance, pooled.covariance, rtol=1e-9)
    assert m.num_points == 12


def test_merge_symmetric_two_component():
    # two unit blobs 10 apart: pooled variance along the axis is 1 + 5^2
    a = sig(0, [0.0, 0.0], np.eye(2), 50)
    b = sig(1, [10.0, 0.0], np.eye(2), 50)
    np.testing.assert_allclose(merge_signatures(a, b).covariance, np.diag([26.0, 1.0]))


def test_merge_bookkeeping():
    a = ClusterSignature(3, 4, np.zeros(2), np.eye(2), created_at_chunk=2, growth_log=[(2, 1), (5, 3)])
    b = ClusterSignature(9, 6, np.ones(2), np.eye(2), created_at_chunk=1, growth_log=[(1, 2), (5, 4)])
    m = merge_signatures(a, b)
    assert m.id == 3 and m.created_at_chunk == 1
    assert m.growth_log == [(1, 2), (2, 1), (5, 7)]
    assert merge_signatures(a, b, id=11).id == 11


def test_merge_dimension_mismatch():
    with pytest.raises(DimensionError):
        merge_signatures(sig(0, [0, 0], np.eye(2), 2), sig(1, [0], [[1.0]], 2))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 40), st.integers(1, 40), st.integers(0, 2 ** 32 - 1))
def test_merge_associative(d, n1, n2, seed):
    r = np.random.default_rng(seed)
    parts = [r.normal(size=(n, d)) * r.uniform(0.1, 10) + r.normal(scale=50, size=d) for n in (n1, n2, 3)]
    s = [ClusterSignature.from_points(p) for p in parts]
    left = merge_signatures(merge_signatures(s[0], s[1]), s[2])
    right = merge_signatures(s[0], merge_signatures(s[1], s[2]))
    np.testing.assert_allclose(left.mean, right.mean, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(left.covariance, right.covariance, rtol=1e-8, atol=1e-8)
