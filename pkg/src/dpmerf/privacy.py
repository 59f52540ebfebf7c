"""Gaussian-mechanism releases, RDP accounting and the noisy-MMD error bound."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .embedding import MeanEmbedding
from .errors import (EmptyGrid, InvalidConfig, InvalidOrder, InvalidSigma,
                     ShapeMismatch, Unsatisfiable)
from .featuremap import make_rng

# Renyi orders used for every epsilon computation.
DEFAULT_ORDERS = np.geomspace(1.05, 1024.0, 60)

SIGMA_RANGE = (1e-2, 1e6)
COUNT_SENSITIVITY = math.sqrt(2.0)
COUNT_FLOOR = 1.0


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float
    num_releases: int = 1

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidConfig(f"epsilon must be positive, got {self.epsilon}", "epsilon")
        if not 0 < self.delta < 1:
            raise InvalidConfig(f"delta must lie in (0, 1), got {self.delta}", "delta")
        if self.num_releases not in (1, 2):
            raise InvalidConfig("num_releases must be 1 or 2", "num_releases")

    def check_delta(self, m: int) -> None:
        if self.delta > 1.0 / m:
            warnings.warn(f"delta={self.delta:g} exceeds 1/m={1.0 / m:g}", stacklevel=2)


@dataclass(frozen=True)
class GaussianMechanismSpec:
    sensitivity: float
    sigma: float

    @property
    def noise_std(self) -> float:
        return self.sensitivity * self.sigma


@dataclass(frozen=True)
class EmbeddingRelease:
    values: np.ndarray
    spec: GaussianMechanismSpec
    kind: str
    num_samples: int
    noise_seed: int
    budget: PrivacyBudget | None = None
    weighted: bool = False
    # per-class weights applied to columns by reweight_embedding
    class_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.class_weights is not None:
            w = np.array(self.class_weights, dtype=np.float64)
            w.setflags(write=False)
            object.__setattr__(self, "class_weights", w)

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NoisyClassCounts:
    values: np.ndarray
    raw_total_m: int
    spec: GaussianMechanismSpec
    noise_seed: int

    def clamped(self, floor: float = COUNT_FLOOR) -> np.ndarray:
        return np.maximum(self.values, floor)

    def label_distribution(self, floor: float = COUNT_FLOOR) -> np.ndarray:
        c = self.clamped(floor)
        return c / c.sum()


class Conversion(NamedTuple):
    epsilon: float
    order: float


# --- accounting -----------------------------------------------------------

def rdp_gaussian(sigma, alpha):
    """RDP of a sensitivity-1 Gaussian mechanism with noise multiplier ``sigma``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 1):
        raise InvalidOrder("Renyi order must exceed 1")
    if not sigma > 0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    out = alpha / (2.0 * sigma**2)
    return float(out) if out.ndim == 0 else out


def rdp_to_dp(rdp, orders, delta: float, conversion: str = "improved") -> Conversion:
    """Convert an RDP curve (values at ``orders``) to (epsilon, delta)-DP.

    ``"improved"`` uses eps_a + log((a-1)/a) - (log(delta) + log(a)) / (a-1);
    ``"classic"`` uses eps_a + log(1/delta) / (a-1).  Both are minimized over
    the grid; the improved rule is never looser.
    """
    orders = np.asarray(orders, dtype=np.float64)
    rdp = np.broadcast_to(np.asarray(rdp, dtype=np.float64), orders.shape)
    if orders.size == 0:
        raise EmptyGrid("no Renyi orders given")
    if np.any(orders <= 1):
        raise InvalidOrder("Renyi orders must exceed 1")
    if not 0 < delta < 1:
        raise InvalidConfig(f"delta must lie in (0, 1), got {delta}", "delta")
    if conversion == "classic":
        eps = rdp + math.log(1.0 / delta) / (orders - 1)
    elif conversion == "improved":
        eps = rdp + np.log1p(-1.0 / orders) - (math.log(delta) + np.log(orders)) / (orders - 1)
    else:
        raise InvalidConfig(f"unknown conversion {conversion!r}", "conversion")
    best = int(np.argmin(eps))
    return Conversion(max(float(eps[best]), 0.0), float(orders[best]))


def epsilon_for_sigma(sigma: float, delta: float, num_releases: int = 1,
                      orders=DEFAULT_ORDERS, conversion: str = "improved") -> Conversion:
    """Epsilon of ``num_releases`` composed Gaussian mechanisms sharing ``sigma``."""
    return rdp_to_dp(num_releases * rdp_gaussian(sigma, orders), orders, delta, conversion)


@dataclass(frozen=True)
class Calibration:
    sigma: float
    epsilon: float
    order: float
    budget: PrivacyBudget
    orders: np.ndarray = field(repr=False)
    at_cap: bool = False


def calibrate_sigma(budget: PrivacyBudget, orders=DEFAULT_ORDERS,
                    conversion: str = "improved", rtol: float = 1e-6) -> Calibration:
    """Smallest noise multiplier in ``SIGMA_RANGE`` meeting ``budget``.

    Bisection runs in log space; the returned sigma is always on the feasible
    side, within ``rtol`` (relative) of the boundary.
    """
    orders = np.asarray(orders, dtype=np.float64)

    def eps(s):
        return epsilon_for_sigma(s, budget.delta, budget.num_releases, orders, conversion).epsilon

    lo, hi = SIGMA_RANGE
    if eps(hi) > budget.epsilon:
        raise Unsatisfiable(
            f"(epsilon={budget.epsilon:g}, delta={budget.delta:g}) is not reachable "
            f"with sigma <= {hi:g}")
    if eps(lo) <= budget.epsilon:
        hi = lo
    else:
        while hi / lo > 1.0 + rtol:
            mid = math.sqrt(lo * hi)
            if eps(mid) <= budget.epsilon:
                hi = mid
            else:
                lo = mid
    final = epsilon_for_sigma(hi, budget.delta, budget.num_releases, orders, conversion)
    return Calibration(hi, final.epsilon, final.order, budget, orders,
                       at_cap=hi >= SIGMA_RANGE[1] * (1 - 1e-3))


def classical_sigma(epsilon: float, delta: float) -> float:
    """sqrt(2 log(1.25/delta)) / epsilon, the textbook single-release bound (epsilon <= 1)."""
    return math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


# --- mechanisms -----------------------------------------------------------

def embedding_sensitivity(kind: str, m: int) -> float:
    if m < 1:
        raise InvalidConfig("embedding needs at least one sample", "num_samples")
    if kind == "hetero_labeled":
        return 2.0 * math.sqrt(2.0) / m
    return 2.0 / m


def privatize_embedding(emb: MeanEmbedding, sigma: float, seed: int,
                        budget: PrivacyBudget | None = None) -> EmbeddingRelease:
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InvalidSigma(f"sigma must be positive and finite, got {sigma}")
    spec = GaussianMechanismSpec(embedding_sensitivity(emb.kind, emb.num_samples), sigma)
    noise = make_rng(seed).standard_normal(emb.values.shape) * spec.noise_std
    return EmbeddingRelease(emb.values + noise, spec, emb.kind, emb.num_samples,
                            int(seed), budget)


def privatize_counts(counts, sigma: float, seed: int) -> NoisyClassCounts:
    counts = np.asarray(counts, dtype=np.float64)
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InvalidSigma(f"sigma must be positive and finite, got {sigma}")
    if counts.ndim != 1 or counts.size < 1 or counts.sum() < 1:
        raise InvalidConfig("counts must be a non-empty vector summing to >= 1", "counts")
    spec = GaussianMechanismSpec(COUNT_SENSITIVITY, sigma)
    noisy = counts + make_rng(seed).standard_normal(counts.shape) * spec.noise_std
    return NoisyClassCounts(noisy, int(round(counts.sum())), spec, int(seed))


def reweight_embedding(release: EmbeddingRelease, counts: NoisyClassCounts,
                       count_floor: float = COUNT_FLOOR) -> EmbeddingRelease:
    """Scale column c by m / max(noisy_count_c, count_floor)."""
    if release.kind == "unlabeled":
        raise ShapeMismatch("only labeled releases can be reweighted")
    if counts.values.shape != (release.num_classes,):
        raise ShapeMismatch(
            f"{counts.values.size} class counts for {release.num_classes} columns")
    weights = release.num_samples / counts.clamped(count_floor)
    return EmbeddingRelease(release.values * weights[None, :], release.spec, release.kind,
                            release.num_samples, release.noise_seed, release.budget,
                            weighted=True, class_weights=weights)


# --- utility bound --------------------------------------------------------

def error_bound(num_features: int, m: int, sigma: float) -> float:
    """Bound on E|noisy RF-MMD^2 - MMD^2| for D features, m samples, noise multiplier sigma."""
    D = num_features
    if D < 2 or D % 2:
        raise InvalidConfig("num_features must be even and >= 2", "num_features")
    if m < 1:
        raise InvalidConfig("m must be >= 1", "m")
    if sigma < 0:
        raise InvalidConfig("sigma must be >= 0", "sigma")
    gamma_ratio = math.exp(gammaln((D + 1) / 2.0) - gammaln(D / 2.0))
    noise_term = 4.0 * D * sigma**2 / m**2 + 8.0 * math.sqrt(2.0) * sigma / m * gamma_ratio
    return noise_term + 8.0 * math.sqrt(2.0 * math.pi / D)
