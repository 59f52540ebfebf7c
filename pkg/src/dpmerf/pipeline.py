"""End-to-end runs: release the private statistics once, then train on them.

:func:`release_phase` is the only step that touches the sensitive dataset.
:func:`training_phase` receives nothing but released quantities.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import data as data_mod
from .data import Dataset, Schema
from .embedding import labeled_mean_embedding, mean_embedding
from .errors import InvalidConfig
from .featuremap import FeatureMap, median_heuristic_bandwidth, sample_frequencies
from .generator import (Architecture, GeneratorParams, TrainConfig, TrainResult,
                        init_generator, label_distribution, train)
from .privacy import (Calibration, EmbeddingRelease, NoisyClassCounts, PrivacyBudget,
                      calibrate_sigma, privatize_counts, privatize_embedding,
                      reweight_embedding)

log = logging.getLogger(__name__)

MODES = ("unlabeled", "balanced", "imbalanced", "hetero")
_FIELD_TYPES = {"str": str, "int": int, "float": float, "bool": bool}


@dataclass
class RunConfig:
    """Every knob of a training run; defaults are the documented values."""
    data: str = ""
    schema: str = ""
    out_dir: str = "run"
    mode: str = "balanced"
    epsilon: float = 1.0
    delta: float = 1e-5
    num_features: int = 1000
    bandwidth: str = "0.1"  # a positive number, or "median"
    median_max_pairs: int = 10000
    undersample: float = 1.0
    latent_dim: int = 10
    hidden: str = "100,100"
    steps: int = 2000
    batch_size: int = 500
    learning_rate: float = 1e-2
    gumbel: bool = False
    temperature: float = 0.5
    freq_seed: int = 0
    noise_seed: int = 1
    train_seed: int = 2
    undersample_seed: int = 3
    count_floor: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            kind = _FIELD_TYPES[f.type]
            try:
                if kind is bool and isinstance(value, str):
                    if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(value)
                    value = value.lower() in ("true", "1", "yes")
                else:
                    value = kind(value)
            except (TypeError, ValueError):
                raise InvalidConfig(f"{f.name}: cannot interpret {value!r} as {kind.__name__}",
                                    f.name) from None
            setattr(self, f.name, value)
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {', '.join(MODES)}", "mode")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidConfig("epsilon must be positive", "epsilon")
        if not 0 < self.delta < 1:
            raise InvalidConfig("delta must lie in (0, 1)", "delta")
        if self.num_features < 2 or self.num_features % 2:
            raise InvalidConfig("num_features must be even and >= 2", "num_features")
        if self.bandwidth != "median":
            try:
                bw = float(self.bandwidth)
            except ValueError:
                bw = float("nan")
            if not bw > 0:
                raise InvalidConfig("bandwidth must be a positive number or 'median'", "bandwidth")
        if not 0 < self.undersample <= 1:
            raise InvalidConfig("undersample must lie in (0, 1]", "undersample")
        try:
            self.hidden_widths
        except ValueError:
            raise InvalidConfig(f"hidden: cannot parse {self.hidden!r}", "hidden") from None
        TrainConfig(**self._train_kwargs())

    @property
    def hidden_widths(self) -> tuple:
        return tuple(int(h) for h in self.hidden.split(",") if h.strip())

    @property
    def num_releases(self) -> int:
        return 2 if self.mode in ("imbalanced", "hetero") else 1

    def _train_kwargs(self):
        sampling = "noisy_counts" if self.num_releases == 2 else "uniform"
        return dict(steps=self.steps, batch_size=self.batch_size,
                    learning_rate=self.learning_rate, seed=self.train_seed,
                    label_sampling=sampling, gumbel=self.gumbel, temperature=self.temperature)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self._train_kwargs())

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Releases:
    """Everything training may use: public config plus DP outputs."""
    fmap: FeatureMap
    schema: Schema
    release: EmbeddingRelease
    counts: NoisyClassCounts | None
    calibration: Calibration
    num_classes: int
    kind: str


def load_training_data(config: RunConfig) -> Dataset:
    ds = data_mod.load_tabular(config.data, config.schema)
    if config.undersample < 1:
        ds = data_mod.undersample(ds, config.undersample, config.undersample_seed)
    return ds


def release_phase(config: RunConfig, ds: Dataset | None = None) -> Releases:
    """Steps 1-4: calibrate sigma, release the embedding (and class counts), reweight."""
    budget = PrivacyBudget(config.epsilon, config.delta, config.num_releases)
    calibration = calibrate_sigma(budget)
    if ds is None:
        ds = load_training_data(config)
    m = len(ds)
    if m == 0:
        raise InvalidConfig("training data is empty", "data")
    budget.check_delta(m)
    if config.mode == "hetero" and ds.schema.d_cat == 0:
        raise InvalidConfig("mode 'hetero' needs categorical columns", "mode")

    if config.bandwidth == "median":
        warnings.warn("bandwidth chosen by the median heuristic on the raw data; "
                      "this step is not privatized", stacklevel=2)
        gamma = median_heuristic_bandwidth(ds.x_num, config.median_max_pairs, config.freq_seed)
    else:
        gamma = float(config.bandwidth)
    fmap = sample_frequencies(ds.schema.d_num, config.num_features, gamma, config.freq_seed)

    if config.mode == "unlabeled":
        if ds.schema.d_cat:
            raise InvalidConfig("mode 'unlabeled' supports numerical columns only", "mode")
        emb = mean_embedding(ds.x_num, fmap)
        num_classes = 0
    else:
        x_cat = ds.x_cat if ds.schema.d_cat else None
        emb = labeled_mean_embedding(ds.x_num, ds.y, fmap, ds.num_classes, x_cat)
        num_classes = ds.num_classes
    release = privatize_embedding(emb, calibration.sigma, config.noise_seed, budget)
    counts = None
    if config.num_releases == 2:
        # independent stream for the second mechanism
        counts = privatize_counts(ds.class_counts(), calibration.sigma, config.noise_seed + 1)
        release = reweight_embedding(release, counts, config.count_floor)
    log.info("released %s embedding of %d rows with sigma=%.4f", emb.kind, m, calibration.sigma)
    return Releases(fmap, ds.schema, release, counts, calibration, num_classes, emb.kind)


def training_phase(rel: Releases, config: RunConfig) -> tuple[TrainResult, np.ndarray]:
    """Step 5: fit the generator to the released embedding."""
    arch = Architecture(latent_dim=config.latent_dim, num_classes=rel.num_classes,
                        hidden=config.hidden_widths, num_numeric=rel.schema.d_num,
                        cat_blocks=rel.schema.cat_blocks)
    params: GeneratorParams = init_generator(arch, config.train_seed)
    tc = config.train_config()
    result = train(params, rel.release, rel.fmap, tc, rel.counts)
    probs = label_distribution(arch, tc, rel.counts)
    return result, probs


def release_metadata(rel: Releases) -> dict:
    cal = rel.calibration
    meta = {
        "kind": rel.kind,
        "num_samples": rel.release.num_samples,
        "sensitivity": rel.release.spec.sensitivity,
        "sigma": cal.sigma,
        "epsilon_target": cal.budget.epsilon,
        "epsilon_achieved": cal.epsilon,
        "rdp_order": cal.order,
        "delta": cal.budget.delta,
        "num_releases": cal.budget.num_releases,
        "noise_seed": rel.release.noise_seed,
        "feature_seed": rel.fmap.seed,
        "weighted": rel.release.weighted,
    }
    if rel.counts is not None:
        meta["count_sensitivity"] = rel.counts.spec.sensitivity
        meta["count_noise_seed"] = rel.counts.noise_seed
        meta["noisy_counts"] = [float(v) for v in rel.counts.values]
    return meta
