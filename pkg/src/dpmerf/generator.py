"""Fully-connected conditional generator trained on a released embedding.

The generator maps ``[z, onehot(y)]`` through ReLU layers to a logit vector;
numerical outputs go through a logistic squasher and each categorical block
through its own softmax.  Gradients of the random-feature MMD loss are
propagated by hand (no autodiff framework) and checked against finite
differences in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Schema
from .embedding import MeanEmbedding
from .errors import DivergedLoss, InvalidArch, InvalidConfig, InvalidSchema, ShapeMismatch
from .featuremap import FeatureMap, make_rng
from .privacy import EmbeddingRelease, NoisyClassCounts

ACTIVATIONS = ("relu",)


@dataclass(frozen=True)
class Architecture:
    latent_dim: int = 10
    num_classes: int = 0  # 0 = unconditional
    hidden: tuple = (100, 100)
    num_numeric: int = 2
    cat_blocks: tuple = ()
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "cat_blocks", tuple(int(b) for b in self.cat_blocks))
        if self.latent_dim < 1:
            raise InvalidArch("latent_dim must be >= 1")
        if self.num_classes < 0:
            raise InvalidArch("num_classes must be >= 0")
        if any(h < 1 for h in self.hidden):
            raise InvalidArch("hidden widths must be >= 1")
        if self.num_numeric < 0 or any(b < 2 for b in self.cat_blocks):
            raise InvalidArch("categorical blocks need at least 2 levels")
        if self.output_dim < 1:
            raise InvalidArch("generator must produce at least one output")
        if self.num_numeric < 1:
            raise InvalidArch("at least one numerical output is required by the feature map")
        if self.activation not in ACTIVATIONS:
            raise InvalidArch(f"unsupported activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.latent_dim + self.num_classes

    @property
    def output_dim(self) -> int:
        return self.num_numeric + sum(self.cat_blocks)

    @property
    def d_cat(self) -> int:
        return sum(self.cat_blocks)

    def layer_shapes(self):
        widths = (self.input_dim,) + self.hidden + (self.output_dim,)
        return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]

    @property
    def num_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())

    def to_dict(self) -> dict:
        return {"latent_dim": self.latent_dim, "num_classes": self.num_classes,
                "hidden": list(self.hidden), "num_numeric": self.num_numeric,
                "cat_blocks": list(self.cat_blocks), "activation": self.activation}


@dataclass(frozen=True)
class GeneratorParams:
    """Architecture plus a flat, read-only parameter vector.

    The layout is, per layer, the row-major ``(out, in)`` weight matrix
    followed by the bias vector.
    """
    arch: Architecture
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).ravel()
        if theta.size != self.arch.num_params:
            raise InvalidArch(f"expected {self.arch.num_params} parameters, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise InvalidArch("parameters must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def layers(self, theta=None):
        theta = self.theta if theta is None else theta
        out, pos = [], 0
        for o, i in self.arch.layer_shapes():
            w = theta[pos:pos + o * i].reshape(o, i)
            pos += o * i
            b = theta[pos:pos + o]
            pos += o
            out.append((w, b))
        return out

    def replace_theta(self, theta) -> "GeneratorParams":
        return GeneratorParams(self.arch, theta)


def init_generator(arch: Architecture, seed: int) -> GeneratorParams:
    """He-normal weights (variance 2/fan_in) and zero biases."""
    rng = make_rng(seed)
    chunks = []
    for o, i in arch.layer_shapes():
        chunks.append(rng.standard_normal(o * i) * np.sqrt(2.0 / i))
        chunks.append(np.zeros(o))
    return GeneratorParams(arch, np.concatenate(chunks))


# --- forward / backward ---------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _inputs(arch, z, y_onehot):
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != arch.latent_dim:
        raise ShapeMismatch(f"latent batch has width {z.shape[1]}, expected {arch.latent_dim}")
    if arch.num_classes == 0:
        return z
    y_onehot = np.atleast_2d(np.asarray(y_onehot, dtype=np.float64))
    if y_onehot.shape != (z.shape[0], arch.num_classes):
        raise ShapeMismatch(f"label batch has shape {y_onehot.shape}, "
                            f"expected ({z.shape[0]}, {arch.num_classes})")
    return np.concatenate([z, y_onehot], axis=1)


def _forward(params: GeneratorParams, z, y_onehot, gumbel=None, temperature=0.5):
    arch = params.arch
    h = _inputs(arch, z, y_onehot)
    cache = []
    layers = params.layers()
    for k, (w, b) in enumerate(layers):
        a = h @ w.T + b
        cache.append((h, a))
        h = np.maximum(a, 0.0) if k < len(layers) - 1 else a
    logits = h
    out = np.empty_like(logits)
    d = arch.num_numeric
    out[:, :d] = _sigmoid(logits[:, :d])
    if gumbel is not None and np.shape(gumbel) != (out.shape[0], arch.d_cat):
        raise ShapeMismatch(f"gumbel noise has shape {np.shape(gumbel)}, "
                            f"expected ({out.shape[0]}, {arch.d_cat})")
    start = d
    for width in arch.cat_blocks:
        sl = slice(start, start + width)
        block = logits[:, sl]
        if gumbel is not None:
            block = (block + gumbel[:, start - d:start - d + width]) / temperature
        out[:, sl] = _softmax(block)
        start += width
    return out, cache


def forward(params: GeneratorParams, z, y_onehot=None) -> np.ndarray:
    """Generator outputs: logistic numerical columns, then soft categorical blocks."""
    return _forward(params, z, y_onehot)[0]


def _backward(params: GeneratorParams, out, cache, d_out, gumbel=None, temperature=0.5):
    arch = params.arch
    d_logits = np.empty_like(d_out)
    d = arch.num_numeric
    s = out[:, :d]
    d_logits[:, :d] = d_out[:, :d] * s * (1.0 - s)
    start = d
    for width in arch.cat_blocks:
        sl = slice(start, start + width)
        p, g = out[:, sl], d_out[:, sl]
        d_block = p * (g - (p * g).sum(axis=1, keepdims=True))
        d_logits[:, sl] = d_block / temperature if gumbel is not None else d_block
        start += width

    layers = params.layers()
    grads = [None] * len(layers)
    delta = d_logits
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        h_in, _ = cache[k]
        grads[k] = (delta.T @ h_in, delta.sum(axis=0))
        if k > 0:
            delta = (delta @ w) * (cache[k - 1][1] > 0)
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def _target(release, arch: Architecture):
    if isinstance(release, (EmbeddingRelease, MeanEmbedding)):
        values = release.values
    else:
        values = np.asarray(release, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
    weights = getattr(release, "class_weights", None)
    if weights is None:
        weights = np.ones(values.shape[1])
    expected_cols = max(arch.num_classes, 1)
    if values.shape[1] != expected_cols:
        raise ShapeMismatch(f"release has {values.shape[1]} columns, generator expects {expected_cols}")
    return values, weights


def synthetic_features(out, arch: Architecture, fmap: FeatureMap):
    """Per-sample features of generator outputs (RFF, or RFF plus scaled soft categoricals)."""
    proj = out[:, :arch.num_numeric] @ fmap.frequencies.T
    scale = np.sqrt(2.0 / fmap.num_features)
    parts = [np.cos(proj) * scale, np.sin(proj) * scale]
    if arch.d_cat:
        parts.append(out[:, arch.num_numeric:] / np.sqrt(arch.d_cat))
    return np.concatenate(parts, axis=1), proj


def synthetic_embedding(params: GeneratorParams, fmap: FeatureMap, z, y, weights=None):
    """Weighted synthetic embedding ``(1/n) sum_i f(G(z_i, y_i)) (w * onehot(y_i))^T``."""
    arch = params.arch
    y_mat = _label_matrix(arch, y, len(z))
    out = forward(params, z, y_mat if arch.num_classes else None)
    feats, _ = synthetic_features(out, arch, fmap)
    w = np.ones(y_mat.shape[1]) if weights is None else np.asarray(weights)
    return feats.T @ (y_mat * w) / len(z)


def _label_matrix(arch, y, n):
    if arch.num_classes == 0:
        return np.ones((n, 1))
    y = np.asarray(y)
    if y.ndim == 2:
        return y.astype(np.float64)
    return np.eye(arch.num_classes)[y.astype(np.int64)]


def loss_and_grad(params: GeneratorParams, release, fmap: FeatureMap, z, y,
                  gumbel=None, temperature: float = 0.5):
    """Squared Frobenius distance to the release and its gradient w.r.t. ``theta``.

    ``y`` holds integer labels (or a one-hot matrix); it is ignored for an
    unconditional generator.  When the release was reweighted by class, the
    same class weights are applied to the synthetic embedding so both sides
    use one weighted label kernel.
    """
    arch = params.arch
    target, weights = _target(release, arch)
    if fmap.input_dim != arch.num_numeric:
        raise ShapeMismatch(f"feature map expects {fmap.input_dim} numerical inputs, "
                            f"generator emits {arch.num_numeric}")
    if target.shape[0] != fmap.num_features + arch.d_cat:
        raise ShapeMismatch(f"release has {target.shape[0]} rows, expected "
                            f"{fmap.num_features + arch.d_cat}")
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    n = z.shape[0]
    y_mat = _label_matrix(arch, y, n)
    out, cache = _forward(params, z, y_mat if arch.num_classes else None, gumbel, temperature)
    feats, _ = synthetic_features(out, arch, fmap)

    y_w = y_mat * weights
    resid = feats.T @ y_w / n - target
    loss = float(np.sum(resid * resid))

    d_feats = y_w @ (2.0 * resid).T / n
    half = fmap.num_features // 2
    # feats already hold scale*cos and scale*sin of the projections
    d_proj = feats[:, :half] * d_feats[:, half:2 * half] - feats[:, half:2 * half] * d_feats[:, :half]
    d_out = np.empty_like(out)
    d_out[:, :arch.num_numeric] = d_proj @ fmap.frequencies
    if arch.d_cat:
        d_out[:, arch.num_numeric:] = d_feats[:, 2 * half:] / np.sqrt(arch.d_cat)
    grad = _backward(params, out, cache, d_out, gumbel, temperature)
    return loss, grad


def gradient_check(params: GeneratorParams, release, fmap: FeatureMap, z, y,
                   gumbel=None, temperature: float = 0.5, step: float = 1e-5):
    """Compare loss_and_grad with central differences on every coordinate.

    Returns ``(max_rel_err, max_abs_err)``.  The relative error of a
    coordinate is ``|fd - g| / max(|fd|, |g|, 1e-6 * max|g|)``: the floor keeps
    coordinates whose true gradient is ~1e-7 of the largest from being judged
    on finite-difference roundoff alone.
    """
    _, grad = loss_and_grad(params, release, fmap, z, y, gumbel, temperature)
    theta = params.theta
    fd = np.empty_like(grad)
    for i in range(theta.size):
        t = theta.copy()
        t[i] += step
        up = loss_and_grad(params.replace_theta(t), release, fmap, z, y, gumbel, temperature)[0]
        t[i] -= 2 * step
        down = loss_and_grad(params.replace_theta(t), release, fmap, z, y, gumbel, temperature)[0]
        fd[i] = (up - down) / (2 * step)
    err = np.abs(fd - grad)
    floor = 1e-6 * np.max(np.abs(grad))
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), floor)
    rel = np.divide(err, denom, out=np.zeros_like(err), where=denom > 0)
    return float(rel.max()), float(err.max())


# --- training -------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 500
    learning_rate: float = 1e-2
    optimizer: str = "adam"
    seed: int = 0
    label_sampling: str = "uniform"  # or "noisy_counts"
    gumbel: bool = False
    temperature: float = 0.5

    def __post_init__(self):
        if self.steps < 0:
            raise InvalidConfig("steps must be >= 0", "steps")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1", "batch_size")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be positive", "learning_rate")
        if self.optimizer != "adam":
            raise InvalidConfig(f"unsupported optimizer {self.optimizer!r}", "optimizer")
        if self.label_sampling not in ("uniform", "noisy_counts"):
            raise InvalidConfig(f"unknown label_sampling {self.label_sampling!r}", "label_sampling")
        if not self.temperature > 0:
            raise InvalidConfig("temperature must be positive", "temperature")


class Adam:
    def __init__(self, size, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainResult:
    params: GeneratorParams
    losses: np.ndarray = field(repr=False)


def label_distribution(arch: Architecture, config: TrainConfig,
                       counts: NoisyClassCounts | None = None) -> np.ndarray:
    c = max(arch.num_classes, 1)
    if config.label_sampling == "uniform" or arch.num_classes == 0:
        return np.full(c, 1.0 / c)
    if counts is None:
        raise InvalidConfig("noisy-count label sampling needs released class counts", "label_sampling")
    if counts.values.shape != (c,):
        raise ShapeMismatch("class counts do not match the number of classes")
    return counts.label_distribution()


def train(params: GeneratorParams, release, fmap: FeatureMap, config: TrainConfig,
          counts: NoisyClassCounts | None = None) -> TrainResult:
    """Adam on the released-embedding MMD; consumes only released quantities."""
    arch = params.arch
    probs = label_distribution(arch, config, counts)
    rng = make_rng(config.seed)
    opt = Adam(arch.num_params, lr=config.learning_rate)
    theta = params.theta.copy()
    current = params
    losses = np.empty(config.steps)
    for step in range(config.steps):
        n = config.batch_size
        y = rng.choice(len(probs), size=n, p=probs)
        z = rng.standard_normal((n, arch.latent_dim))
        gumbel = rng.gumbel(size=(n, arch.d_cat)) if config.gumbel and arch.d_cat else None
        loss, grad = loss_and_grad(current, release, fmap, z, y, gumbel, config.temperature)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise DivergedLoss(f"non-finite loss at step {step}")
        losses[step] = loss
        theta = opt.step(theta, grad)
        current = params.replace_theta(theta)
    return TrainResult(current, losses)


# --- sampling -------------------------------------------------------------

def check_schema(arch: Architecture, schema: Schema) -> None:
    if not schema.fitted:
        raise InvalidSchema("schema has no numerical bounds; cannot de-normalize")
    if schema.d_num != arch.num_numeric or schema.cat_blocks != arch.cat_blocks:
        raise InvalidSchema("schema columns do not match the generator outputs")
    if arch.num_classes and schema.num_classes != arch.num_classes:
        raise InvalidSchema("schema label levels do not match the generator classes")


def sample(params: GeneratorParams, n: int, label_dist, seed: int, schema: Schema) -> Dataset:
    """Draw ``n`` synthetic rows with categorical blocks hardened by argmax."""
    arch = params.arch
    check_schema(arch, schema)
    probs = np.asarray(label_dist, dtype=np.float64)
    rng = make_rng(seed)
    y = rng.choice(len(probs), size=n, p=probs)
    z = rng.standard_normal((n, arch.latent_dim))
    if n == 0:
        return Dataset(np.zeros((0, arch.num_numeric)), np.zeros((0, arch.d_cat)),
                       y, schema, "synthetic")
    y_in = np.eye(arch.num_classes)[y] if arch.num_classes else None
    out = forward(params, z, y_in)
    x_num = np.clip(out[:, :arch.num_numeric], 0.0, 1.0)
    x_cat = np.zeros((n, arch.d_cat))
    start = arch.num_numeric
    for width in arch.cat_blocks:
        winner = np.argmax(out[:, start:start + width], axis=1)
        x_cat[np.arange(n), start - arch.num_numeric + winner] = 1.0
        start += width
    return Dataset(x_num, x_cat, y, schema, "synthetic")
