"""Random-feature mean embeddings and MMD estimators.

Labeled embeddings are stored as ``(D_eff, C)`` matrices whose column ``c``
is the sum of per-point features over class ``c`` divided by the total
number of points ``m``.  For heterogeneous data the per-point feature is
``[phi(x_num); x_cat / sqrt(d_cat)]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (DimensionMismatch, EmptyDataset, LabelOutOfRange,
                     NonBinaryCategorical, ShapeMismatch)
from .featuremap import FeatureMap, gaussian_gram

KINDS = ("unlabeled", "labeled", "hetero_labeled")

# rows featurized at once; fixed so reductions are reproducible
CHUNK_ROWS = 1024


@dataclass(frozen=True)
class MeanEmbedding:
    values: np.ndarray  # (D_eff, C)
    num_samples: int
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape


def _check_points(points, d):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[0] == 0:
        raise EmptyDataset("no points to embed")
    if points.ndim != 2 or points.shape[1] != d:
        raise DimensionMismatch(f"expected points of dimension {d}, got shape {points.shape}")
    return points


def check_binary(x_cat) -> np.ndarray:
    x_cat = np.asarray(x_cat, dtype=np.float64)
    if not np.all((x_cat == 0.0) | (x_cat == 1.0)):
        raise NonBinaryCategorical("categorical block must contain only 0/1 entries")
    return x_cat


def hetero_features(x_num, x_cat, fmap: FeatureMap) -> np.ndarray:
    """Sum-kernel features for a batch; ``x_cat`` may hold soft (non-binary) values."""
    x_cat = np.atleast_2d(np.asarray(x_cat, dtype=np.float64))
    d_cat = x_cat.shape[1]
    if d_cat < 1:
        raise DimensionMismatch("heterogeneous features need d_cat >= 1")
    phi = fmap.featurize(np.atleast_2d(x_num))
    if phi.shape[0] != x_cat.shape[0]:
        raise DimensionMismatch("numerical and categorical batches differ in length")
    return np.concatenate([phi, x_cat / np.sqrt(d_cat)], axis=1)


def hetero_feature(x_num, x_cat, fmap: FeatureMap) -> np.ndarray:
    x_num = np.asarray(x_num, dtype=np.float64)
    x_cat = check_binary(x_cat)
    if x_num.ndim != 1 or x_cat.ndim != 1:
        raise DimensionMismatch("hetero_feature takes a single point")
    return hetero_features(x_num[None, :], x_cat[None, :], fmap)[0]


def mean_embedding(points, fmap: FeatureMap) -> MeanEmbedding:
    points = _check_points(points, fmap.input_dim)
    m = points.shape[0]
    partial = [fmap.featurize(points[s:s + CHUNK_ROWS]).sum(axis=0)
               for s in range(0, m, CHUNK_ROWS)]
    total = np.sum(partial, axis=0)
    return MeanEmbedding(total / m, m, "unlabeled")


def labeled_mean_embedding(x_num, y, fmap: FeatureMap, num_classes: int,
                           x_cat=None) -> MeanEmbedding:
    """Product-kernel embedding (``x_cat is None``) or sum/product embedding."""
    x_num = _check_points(x_num, fmap.input_dim)
    m = x_num.shape[0]
    y = np.asarray(y)
    if y.shape != (m,):
        raise DimensionMismatch(f"expected {m} labels, got shape {y.shape}")
    if np.any(y < 0) or np.any(y >= num_classes):
        raise LabelOutOfRange(f"labels must lie in 0..{num_classes - 1}")
    y = y.astype(np.int64)
    if x_cat is not None:
        x_cat = check_binary(x_cat)
        if x_cat.ndim != 2 or x_cat.shape[0] != m:
            raise DimensionMismatch("x_cat must be (m, d_cat)")
        if x_cat.shape[1] == 0:
            x_cat = None

    kind = "labeled" if x_cat is None else "hetero_labeled"
    width = fmap.num_features + (0 if x_cat is None else x_cat.shape[1])
    total = np.zeros((width, num_classes))
    for s in range(0, m, CHUNK_ROWS):
        sl = slice(s, s + CHUNK_ROWS)
        if x_cat is None:
            feats = fmap.featurize(x_num[sl])
        else:
            feats = hetero_features(x_num[sl], x_cat[sl], fmap)
        onehot = np.eye(num_classes)[y[sl]]
        total += feats.T @ onehot
    return MeanEmbedding(total / m, m, kind)


def mmd_rf_sq(a: MeanEmbedding, b: MeanEmbedding) -> float:
    if a.shape != b.shape or a.kind != b.kind:
        raise ShapeMismatch(f"cannot compare {a.kind}{a.shape} with {b.kind}{b.shape}")
    diff = a.values - b.values
    return float(np.sum(diff * diff))


def mmd_full_sq(x, x_prime, kernel: Callable) -> float:
    """Biased V-statistic MMD^2 from pairwise kernel evaluations.

    ``kernel(a, b)`` must return the Gram matrix between two point sets; the
    point sets are passed through untouched, so they can be arrays or tuples
    of arrays (e.g. ``(x, y)`` for labeled data).
    """
    k_xx = np.asarray(kernel(x, x))
    k_yy = np.asarray(kernel(x_prime, x_prime))
    k_xy = np.asarray(kernel(x, x_prime))
    m, n = k_xy.shape
    if m == 0 or n == 0:
        raise EmptyDataset("MMD needs two non-empty samples")
    return float(k_xx.sum() / m**2 + k_yy.sum() / n**2 - 2.0 * k_xy.sum() / (m * n))


# Gram-matrix builders for mmd_full_sq

def exact_kernel(bandwidth: float) -> Callable:
    return lambda a, b: gaussian_gram(a, b, bandwidth)


def rf_kernel(fmap: FeatureMap) -> Callable:
    return lambda a, b: fmap.featurize(np.atleast_2d(a)) @ fmap.featurize(np.atleast_2d(b)).T


def product_kernel(base: Callable, num_classes: int) -> Callable:
    """k((x, y), (x', y')) = base(x, x') * <onehot(y), onehot(y')>; points are (x, y) tuples."""
    def gram(a, b):
        (xa, ya), (xb, yb) = a, b
        eye = np.eye(num_classes)
        return base(xa, xb) * (eye[np.asarray(ya)] @ eye[np.asarray(yb)].T)
    return gram


def sum_kernel(num_kernel: Callable) -> Callable:
    """k = k_num(x_num, x_num') + x_cat . x_cat' / d_cat; points are (x_num, x_cat) tuples."""
    def gram(a, b):
        (na, ca), (nb, cb) = a, b
        ca, cb = np.atleast_2d(ca), np.atleast_2d(cb)
        return num_kernel(na, nb) + ca @ cb.T / ca.shape[1]
    return gram


def hetero_product_kernel(num_kernel: Callable, num_classes: int) -> Callable:
    """Sum kernel on features times the label kernel; points are (x_num, x_cat, y)."""
    inner = sum_kernel(num_kernel)

    def gram(a, b):
        eye = np.eye(num_classes)
        return inner(a[:2], b[:2]) * (eye[np.asarray(a[2])] @ eye[np.asarray(b[2])].T)
    return gram
