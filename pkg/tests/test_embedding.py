import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpmerf.embedding import (MeanEmbedding, exact_kernel, hetero_feature, hetero_features,
                              hetero_product_kernel, labeled_mean_embedding, mean_embedding,
                              mmd_full_sq, mmd_rf_sq, product_kernel, rf_kernel, sum_kernel)
from dpmerf.errors import (DimensionMismatch, EmptyDataset, LabelOutOfRange,
                           NonBinaryCategorical, ShapeMismatch)
from dpmerf.featuremap import approx_kernel, exact_gaussian_kernel, sample_frequencies


def one_hot_blocks(rng, n, blocks):
    parts = []
    for w in blocks:
        parts.append(np.eye(w)[rng.integers(0, w, n)])
    return np.concatenate(parts, axis=1)


@pytest.fixture
def fmap():
    return sample_frequencies(3, 40, 1.1, 9)


def test_single_point(fmap, rng):
    x = rng.normal(size=3)
    emb = mean_embedding(x[None], fmap)
    assert emb.shape == (40, 1) and emb.kind == "unlabeled" and emb.num_samples == 1
    assert np.array_equal(emb.values[:, 0], fmap(x))


def test_identical_copies(fmap, rng):
    x = rng.normal(size=3)
    emb = mean_embedding(np.tile(x, (77, 1)), fmap)
    assert np.allclose(emb.values[:, 0], fmap(x), atol=1e-12, rtol=0)


def test_matches_naive_sum(fmap, rng):
    pts = rng.normal(size=(37, 3))
    naive = np.zeros(40)
    for p in pts:
        naive += fmap(p)
    assert np.allclose(mean_embedding(pts, fmap).values[:, 0], naive / 37, atol=1e-12, rtol=0)


def test_chunked_sum_matches_naive(rng):
    fm = sample_frequencies(2, 10, 0.5, 0)
    pts = rng.normal(size=(2500, 2))
    naive = fm(pts).mean(axis=0)
    assert np.allclose(mean_embedding(pts, fm).values[:, 0], naive, atol=1e-12, rtol=0)


def test_empty_and_mismatch(fmap):
    with pytest.raises(EmptyDataset):
        mean_embedding(np.zeros((0, 3)), fmap)
    with pytest.raises(DimensionMismatch):
        mean_embedding(np.zeros((4, 2)), fmap)


def test_labeled_single_point(fmap, rng):
    x = rng.normal(size=(1, 3))
    emb = labeled_mean_embedding(x, np.array([2]), fmap, 3)
    assert emb.shape == (40, 3) and emb.kind == "labeled"
    assert np.all(emb.values[:, :2] == 0)
    assert np.allclose(emb.values[:, 2], fmap(x[0]), atol=1e-15)


def test_labeled_empty_class(fmap, rng):
    emb = labeled_mean_embedding(rng.normal(size=(10, 3)), np.zeros(10, int), fmap, 2)
    assert np.all(emb.values[:, 1] == 0)


def test_label_out_of_range(fmap):
    with pytest.raises(LabelOutOfRange):
        labeled_mean_embedding(np.zeros((2, 3)), np.array([0, 3]), fmap, 3)
    with pytest.raises(LabelOutOfRange):
        labeled_mean_embedding(np.zeros((2, 3)), np.array([-1, 0]), fmap, 3)


def test_column_decomposition(fmap, rng):
    x, y = rng.normal(size=(60, 3)), rng.integers(0, 4, 60)
    emb = labeled_mean_embedding(x, y, fmap, 4)
    for c in range(4):
        oracle = sum(fmap(x[i]) for i in range(60) if y[i] == c) / 60
        assert np.allclose(emb.values[:, c], oracle, atol=1e-12, rtol=0)


def test_product_kernel_identity(fmap, rng):
    x = rng.normal(size=(30, 3))
    y = np.repeat([0, 1], 15)
    emb = labeled_mean_embedding(x, y, fmap, 2)
    for _ in range(20):
        xp, yp = rng.normal(size=3), rng.integers(0, 2)
        probe = np.outer(fmap(xp), np.eye(2)[yp])
        lhs = np.sum(emb.values * probe)
        rhs = np.mean([approx_kernel(x[i], xp, fmap) * (y[i] == yp) for i in range(30)])
        assert abs(lhs - rhs) < 1e-12


def test_hetero_feature_example(fmap):
    h = hetero_feature(np.zeros(3), np.array([1, 0, 0, 0]), fmap)
    assert h.shape == (44,)
    assert np.allclose(h[-4:], [0.5, 0, 0, 0])
    assert abs(np.linalg.norm(h) - math.sqrt(1.25)) < 1e-12


def test_hetero_feature_rejects_soft(fmap):
    with pytest.raises(NonBinaryCategorical):
        hetero_feature(np.zeros(3), np.array([0.5, 0.5]), fmap)
    with pytest.raises(NonBinaryCategorical):
        labeled_mean_embedding(np.zeros((1, 3)), [0], fmap, 2, x_cat=np.array([[0.5, 0.5]]))


def test_hetero_batch_allows_soft(fmap):
    h = hetero_features(np.zeros((2, 3)), np.array([[0.3, 0.7], [1.0, 0.0]]), fmap)
    assert h.shape == (2, 42)


def test_hetero_sum_kernel_identity(fmap, rng):
    for _ in range(50):
        a_num, b_num = rng.normal(size=3), rng.normal(size=3)
        a_cat, b_cat = one_hot_blocks(rng, 1, (3, 2, 4))[0], one_hot_blocks(rng, 1, (3, 2, 4))[0]
        lhs = hetero_feature(a_num, a_cat, fmap) @ hetero_feature(b_num, b_cat, fmap)
        rhs = approx_kernel(a_num, b_num, fmap) + a_cat @ b_cat / 9
        assert abs(lhs - rhs) < 1e-12


def test_hetero_norm_bound_and_kind(fmap, rng):
    x_cat = one_hot_blocks(rng, 20, (2, 3))
    emb = labeled_mean_embedding(rng.normal(size=(20, 3)), rng.integers(0, 2, 20), fmap, 2, x_cat)
    assert emb.kind == "hetero_labeled" and emb.shape == (45, 2)
    assert np.linalg.norm(emb.values) <= math.sqrt(2)
    # all-ones categorical reaches the sqrt(2) norm exactly
    h = hetero_feature(np.zeros(3), np.ones(5), fmap)
    assert abs(np.linalg.norm(h) - math.sqrt(2)) < 1e-12


@given(st.integers(1, 40), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_norm_bounds(m, C, seed):
    rng = np.random.default_rng(seed)
    fm = sample_frequencies(2, 20, 0.7, seed % 97)
    x, y = rng.normal(size=(m, 2)) * 2, rng.integers(0, C, m)
    assert np.linalg.norm(mean_embedding(x, fm).values) <= 1 + 1e-12
    assert np.linalg.norm(labeled_mean_embedding(x, y, fm, C).values) <= 1 + 1e-12
    x_cat = one_hot_blocks(rng, m, (2, 3))
    assert np.linalg.norm(labeled_mean_embedding(x, y, fm, C, x_cat).values) <= math.sqrt(2) + 1e-12


def test_mmd_rf_identity_and_shape(fmap, rng):
    x = rng.normal(size=(10, 3))
    e = mean_embedding(x, fmap)
    assert mmd_rf_sq(e, e) == 0.0
    assert mmd_rf_sq(e, mean_embedding(x.copy(), fmap)) < 1e-12
    with pytest.raises(ShapeMismatch):
        mmd_rf_sq(e, labeled_mean_embedding(x, np.zeros(10, int), fmap, 2))


def test_mmd_rf_vs_pairwise(fmap, rng):
    x, xp = rng.normal(size=(50, 3)), rng.normal(size=(50, 3)) + 0.5
    k = lambda a, b: approx_kernel(a, b, fmap)
    brute = (sum(k(a, b) for a in x for b in x) / 2500 + sum(k(a, b) for a in xp for b in xp) / 2500
             - 2 * sum(k(a, b) for a in x for b in xp) / 2500)
    rf = mmd_rf_sq(mean_embedding(x, fmap), mean_embedding(xp, fmap))
    assert abs(rf - brute) < 1e-9


def test_mmd_full_basics(rng):
    x = rng.normal(size=(12, 2))
    assert abs(mmd_full_sq(x, x, exact_kernel(0.9))) < 1e-12
    a, b = np.array([[0.0, 1.0]]), np.array([[1.0, -0.5]])
    expect = 2 - 2 * exact_gaussian_kernel(a[0], b[0], 0.9)
    assert abs(mmd_full_sq(a, b, exact_kernel(0.9)) - expect) < 1e-15
    with pytest.raises(EmptyDataset):
        mmd_full_sq(np.zeros((0, 2)), x, exact_kernel(1.0))


def test_mmd_full_rf_both_directions(fmap, rng):
    x, xp = rng.normal(size=(30, 3)), rng.normal(size=(40, 3))
    ex, exp_ = mean_embedding(x, fmap), mean_embedding(xp, fmap)
    assert abs(mmd_full_sq(x, xp, rf_kernel(fmap)) - mmd_rf_sq(ex, exp_)) < 1e-9
    assert abs(mmd_full_sq(xp, x, rf_kernel(fmap)) - mmd_rf_sq(exp_, ex)) < 1e-9


def test_mmd_labeled_product_kernel(fmap, rng):
    x, y = rng.normal(size=(30, 3)), rng.integers(0, 3, 30)
    xp, yp = rng.normal(size=(40, 3)), rng.integers(0, 3, 40)
    rf = mmd_rf_sq(labeled_mean_embedding(x, y, fmap, 3), labeled_mean_embedding(xp, yp, fmap, 3))
    full = mmd_full_sq((x, y), (xp, yp), product_kernel(rf_kernel(fmap), 3))
    assert abs(rf - full) < 1e-9


def test_mmd_hetero_sum_kernel(fmap, rng):
    blocks = (2, 4)
    x, c, y = rng.normal(size=(30, 3)), one_hot_blocks(rng, 30, blocks), rng.integers(0, 2, 30)
    xp, cp, yp = rng.normal(size=(25, 3)), one_hot_blocks(rng, 25, blocks), rng.integers(0, 2, 25)
    rf = mmd_rf_sq(labeled_mean_embedding(x, y, fmap, 2, c), labeled_mean_embedding(xp, yp, fmap, 2, cp))
    full = mmd_full_sq((x, c, y), (xp, cp, yp), hetero_product_kernel(rf_kernel(fmap), 2))
    assert abs(rf - full) < 1e-9
    # unlabeled sum kernel on the same features
    e1 = MeanEmbedding(hetero_features(x, c, fmap).mean(axis=0)[:, None], 30, "unlabeled")
    e2 = MeanEmbedding(hetero_features(xp, cp, fmap).mean(axis=0)[:, None], 25, "unlabeled")
    assert abs(mmd_rf_sq(e1, e2) - mmd_full_sq((x, c), (xp, cp), sum_kernel(rf_kernel(fmap)))) < 1e-9
