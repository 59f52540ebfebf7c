import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dpmerf.errors import DegenerateData, DimensionMismatch, InvalidConfig
from dpmerf.featuremap import (FeatureMap, approx_kernel, exact_gaussian_kernel, featurize,
                               gaussian_gram, median_heuristic_bandwidth, sample_frequencies,
                               _unrank_pairs)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_sample_frequencies_deterministic():
    a = sample_frequencies(2, 4, 1.0, 7)
    b = sample_frequencies(2, 4, 1.0, 7)
    assert np.array_equal(a.frequencies, b.frequencies)
    assert a.frequencies.shape == (2, 2)
    assert not np.array_equal(a.frequencies, sample_frequencies(2, 4, 1.0, 8).frequencies)


@pytest.mark.parametrize("D", [3, 0, -2, 1])
def test_bad_feature_count(D):
    with pytest.raises(InvalidConfig):
        sample_frequencies(2, D, 1.0, 0)


def test_bad_bandwidth_and_dim():
    with pytest.raises(InvalidConfig):
        sample_frequencies(2, 4, 0.0, 0)
    with pytest.raises(InvalidConfig):
        sample_frequencies(0, 4, 1.0, 0)


def test_frequencies_read_only():
    fm = sample_frequencies(3, 10, 1.0, 0)
    with pytest.raises(ValueError):
        fm.frequencies[0, 0] = 1.0


def test_huge_bandwidth_shrinks_frequencies():
    fm = sample_frequencies(1, 2 * 10**6, 1e9, 3)
    w = fm.frequencies.ravel()
    assert np.all(np.abs(w) < 1e-6)
    stderr = 1e-9 / math.sqrt(w.size)
    assert abs(w.mean()) < 5 * stderr


def test_frequency_scale_matches_bandwidth():
    w = sample_frequencies(4, 200000, 0.5, 1).frequencies.ravel()
    assert abs(w.std() - 2.0) < 0.02


def test_featurize_zero_vector():
    fm = sample_frequencies(3, 10, 1.0, 0)
    phi = featurize(np.zeros(3), fm)
    assert np.allclose(phi[:5], math.sqrt(2 / 10), atol=0, rtol=1e-15)
    assert np.all(phi[5:] == 0)
    assert abs(np.linalg.norm(phi) - 1) < 1e-12


def test_featurize_single_frequency():
    fm = FeatureMap(np.array([[1.0]]), 1.0, 0)
    assert np.allclose(featurize(np.array([math.pi / 2]), fm), [0.0, 1.0], atol=1e-12)


def test_unit_norm_batch(rng):
    fm = sample_frequencies(5, 50, 1.3, 2)
    x = rng.normal(size=(1000, 5)) * 3
    norms = np.linalg.norm(fm.featurize(x), axis=1)
    assert np.all(np.abs(norms - 1) <= 1e-9)


def test_batch_matches_single(rng):
    fm = sample_frequencies(3, 20, 0.7, 0)
    x = rng.normal(size=(6, 3))
    batch = fm(x)
    assert np.array_equal(batch, fm(x))
    for i in range(6):
        # a batch goes through a different BLAS path; agreement is to rounding only
        assert np.allclose(batch[i], fm(x[i]), rtol=0, atol=1e-14)
        assert np.array_equal(fm(x[i]), fm(x[i].copy()))


def test_dimension_mismatch():
    fm = sample_frequencies(3, 10, 1.0, 0)
    with pytest.raises(DimensionMismatch):
        featurize(np.zeros(2), fm)
    with pytest.raises(DimensionMismatch):
        approx_kernel(np.zeros(3), np.zeros(4), fm)


@given(arrays(np.float64, 4, elements=finite))
def test_unit_norm_property(x):
    fm = sample_frequencies(4, 64, 0.9, 11)
    assert abs(np.linalg.norm(fm(x)) - 1) <= 1e-9


@given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite),
       arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_symmetry_and_translation(x, xp, t):
    fm = sample_frequencies(3, 40, 1.5, 4)
    assert approx_kernel(x, xp, fm) == approx_kernel(xp, x, fm)
    assert abs(approx_kernel(x + t, xp + t, fm) - approx_kernel(x, xp, fm)) <= 1e-9
    assert -1 - 1e-12 <= approx_kernel(x, xp, fm) <= 1 + 1e-12


def test_self_kernel_is_one(rng):
    fm = sample_frequencies(2, 30, 1.0, 0)
    for x in rng.normal(size=(20, 2)):
        assert abs(approx_kernel(x, x, fm) - 1) < 1e-9


@given(arrays(np.float64, 2, elements=st.floats(-10, 10)), arrays(np.float64, 2, elements=st.floats(-10, 10)))
def test_two_feature_cosine_identity(x, xp):
    fm = sample_frequencies(2, 2, 0.8, 5)
    w = fm.frequencies[0]
    assert abs(approx_kernel(x, xp, fm) - math.cos(w @ (x - xp))) <= 1e-12


def test_exact_kernel_values():
    assert exact_gaussian_kernel([1.0, 2.0], [1.0, 2.0], 0.3) == 1.0
    gamma = 1.7
    assert math.isclose(exact_gaussian_kernel([0.0], [gamma * math.sqrt(2)], gamma), math.exp(-1))
    assert math.isclose(exact_gaussian_kernel([0, 0], [3, 4], 5.0), math.exp(-0.5))
    assert round(exact_gaussian_kernel([0, 0], [3, 4], 5.0), 4) == 0.6065


def test_gram_matches_pointwise(rng):
    a, b = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    g = gaussian_gram(a, b, 0.8)
    for i in range(5):
        for j in range(4):
            assert abs(g[i, j] - exact_gaussian_kernel(a[i], b[j], 0.8)) < 1e-14


def test_approximation_improves_with_features(rng):
    x, xp = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    exact = np.array([exact_gaussian_kernel(a, b, 1.2) for a, b in zip(x, xp)])
    errs = []
    D = 64
    while D <= 16384:
        e = []
        for seed in range(20):
            fm = sample_frequencies(3, D, 1.2, seed)
            approx = np.sum(fm(x) * fm(xp), axis=1)
            e.append(np.mean(np.abs(approx - exact)))
        errs.append(np.mean(e))
        D *= 2
    inversions = [(a, b) for a, b in zip(errs, errs[1:]) if b > a]
    assert len(inversions) <= 1
    assert all(b <= 1.1 * a for a, b in inversions)


# --- median heuristic -------------------------------------------------------

def test_median_two_points():
    assert median_heuristic_bandwidth(np.array([[0.0, 0.0], [3.0, 0.0]])) == 3.0


def test_median_degenerate():
    with pytest.raises(DegenerateData):
        median_heuristic_bandwidth(np.ones((10, 2)))


def test_median_needs_two_rows():
    with pytest.raises(InvalidConfig):
        median_heuristic_bandwidth(np.ones((1, 2)))


def test_median_exhaustive_oracle(rng):
    x = rng.normal(size=(100, 2))
    dists = [np.linalg.norm(x[i] - x[j]) for i, j in combinations(range(100), 2)]
    assert median_heuristic_bandwidth(x, max_pairs=4950) == np.median(dists)


def test_median_sampled_is_deterministic(rng):
    x = rng.normal(size=(500, 3))
    a = median_heuristic_bandwidth(x, max_pairs=2000, seed=3)
    assert a == median_heuristic_bandwidth(x, max_pairs=2000, seed=3)
    full = median_heuristic_bandwidth(x, max_pairs=10**6)
    assert abs(a - full) / full < 0.05


@given(st.integers(2, 60))
def test_unrank_pairs_enumerates_upper_triangle(m):
    total = m * (m - 1) // 2
    i, j = _unrank_pairs(np.arange(total), m)
    ti, tj = np.triu_indices(m, 1)
    assert np.array_equal(i, ti) and np.array_equal(j, tj)
