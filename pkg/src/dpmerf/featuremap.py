"""Random Fourier features for the Gaussian kernel.

The map sends ``x`` to ``sqrt(2/D) [cos(W x); sin(W x)]`` where the rows of
``W`` are drawn from ``N(0, I / gamma**2)``, so that inner products of features
approximate ``exp(-|x - x'|^2 / (2 gamma^2))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, DimensionMismatch, InvalidConfig

PRNG_NAME = "philox-4x64"
PRNG_VERSION = 1


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every random draw in the package."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class FeatureMap:
    frequencies: np.ndarray  # (D/2, d)
    bandwidth: float
    seed: int

    def __post_init__(self):
        freq = np.array(self.frequencies, dtype=np.float64, order="C")
        if freq.ndim != 2 or freq.shape[0] < 1:
            raise InvalidConfig("frequencies must be a non-empty 2-d array", "frequencies")
        freq.setflags(write=False)
        object.__setattr__(self, "frequencies", freq)

    @property
    def num_features(self) -> int:
        return 2 * self.frequencies.shape[0]

    @property
    def input_dim(self) -> int:
        return self.frequencies.shape[1]

    def projections(self, x: np.ndarray) -> np.ndarray:
        return _as_points(x, self.input_dim) @ self.frequencies.T

    def featurize(self, x: np.ndarray) -> np.ndarray:
        """Features of a single point ``(d,)`` or a batch ``(n, d)``."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        proj = self.projections(x)
        scale = np.sqrt(2.0 / self.num_features)
        out = np.concatenate([np.cos(proj), np.sin(proj)], axis=1) * scale
        return out[0] if single else out

    __call__ = featurize


def _as_points(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionMismatch(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return x


def sample_frequencies(d: int, num_features: int, bandwidth: float, seed: int) -> FeatureMap:
    if num_features < 2 or num_features % 2:
        raise InvalidConfig(f"num_features must be even and >= 2, got {num_features}", "num_features")
    if d < 1:
        raise InvalidConfig(f"input dimension must be >= 1, got {d}", "d")
    if not bandwidth > 0:
        raise InvalidConfig(f"bandwidth must be positive, got {bandwidth}", "bandwidth")
    rng = make_rng(seed)
    freq = rng.standard_normal((num_features // 2, d)) / bandwidth
    return FeatureMap(freq, float(bandwidth), int(seed))


def featurize(x, fmap: FeatureMap) -> np.ndarray:
    return fmap.featurize(x)


def approx_kernel(x, x_prime, fmap: FeatureMap) -> float:
    x, x_prime = np.asarray(x, dtype=np.float64), np.asarray(x_prime, dtype=np.float64)
    if x.ndim != 1 or x_prime.ndim != 1:
        raise DimensionMismatch("approx_kernel takes two single points")
    return float(np.dot(fmap.featurize(x), fmap.featurize(x_prime)))


def exact_gaussian_kernel(x, x_prime, bandwidth: float) -> float:
    diff = np.asarray(x, dtype=np.float64) - np.asarray(x_prime, dtype=np.float64)
    return float(np.exp(-np.dot(diff, diff) / (2.0 * bandwidth**2)))


def gaussian_gram(a, b, bandwidth: float) -> np.ndarray:
    """Exact Gaussian kernel matrix between two point sets."""
    a, b = np.atleast_2d(np.asarray(a, float)), np.atleast_2d(np.asarray(b, float))
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * bandwidth**2))


def _unrank_pairs(k: np.ndarray, m: int):
    # row-major enumeration of the strict upper triangle of an m x m matrix
    k = np.asarray(k, dtype=np.int64)
    i = m - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * m * (m - 1) - 7) / 2.0 - 0.5).astype(np.int64)
    j = k + i + 1 - m * (m - 1) // 2 + (m - i) * ((m - i) - 1) // 2
    return i, j


def median_heuristic_bandwidth(data, max_pairs: int = 10000, seed: int = 0) -> float:
    """Median Euclidean distance over (at most ``max_pairs``) distinct row pairs.

    When ``max_pairs`` covers every pair the result is the exact pairwise
    median; otherwise pairs are drawn uniformly without replacement.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    m = data.shape[0]
    if m < 2:
        raise InvalidConfig("median heuristic needs at least 2 rows", "data")
    if max_pairs < 1:
        raise InvalidConfig("max_pairs must be >= 1", "max_pairs")
    total = m * (m - 1) // 2
    if max_pairs >= total:
        i, j = np.triu_indices(m, k=1)
    else:
        k = make_rng(seed).choice(total, size=max_pairs, replace=False)
        i, j = _unrank_pairs(k, m)
    dist = np.linalg.norm(data[i] - data[j], axis=1)
    if not np.any(dist > 0):
        raise DegenerateData("every sampled pair of rows coincides")
    gamma = float(np.median(dist))
    if gamma <= 0:
        raise DegenerateData("median pairwise distance is zero")
    return gamma
