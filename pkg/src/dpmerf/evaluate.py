"""Downstream utility of synthetic data: small classifiers scored on real data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, GridMixture
from .errors import InvalidConfig, SchemaMismatch, SingleClassTrain

CLASSIFIERS = ("logreg", "nearest_centroid")


@dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    classifier: str = ""
    seed: int | None = None

    def format(self) -> str:
        parts = [f"metric={self.metric}", f"value={self.value:.6f}"]
        if self.classifier:
            parts.append(f"classifier={self.classifier}")
        if self.seed is not None:
            parts.append(f"seed={self.seed}")
        return " ".join(parts)


def roc_auc(labels, scores) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg); ties count one half."""
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes in the evaluation set")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_f1(y_true, y_pred, num_classes: int) -> float:
    scores = []
    for c in range(num_classes):
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


class LogisticRegression:
    """Multinomial logistic regression by full-batch gradient descent."""

    def __init__(self, l2=1e-4, iterations=2000, lr=0.1):
        self.l2, self.iterations, self.lr = l2, iterations, lr

    def fit(self, x, y, num_classes):
        n, d = x.shape
        self.w = np.zeros((d, num_classes))
        self.b = np.zeros(num_classes)
        onehot = np.eye(num_classes)[y]
        for _ in range(self.iterations):
            p = self.predict_proba(x)
            g = (p - onehot) / n
            self.w -= self.lr * (x.T @ g + self.l2 * self.w)
            self.b -= self.lr * g.sum(axis=0)
        return self

    def predict_proba(self, x):
        logits = x @ self.w + self.b
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)


class NearestCentroid:
    def fit(self, x, y, num_classes):
        self.centroids = np.full((num_classes, x.shape[1]), np.inf)
        for c in np.unique(y):
            self.centroids[c] = x[y == c].mean(axis=0)
        return self

    def predict_proba(self, x):
        # softmax of negative squared distances; classes unseen in training get zero mass
        sq = ((x[:, None, :] - np.where(np.isfinite(self.centroids), self.centroids, 0.0)[None]) ** 2).sum(-1)
        logits = np.where(np.isfinite(self.centroids[:, 0])[None, :], -sq, -np.inf)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)


def train_eval_classifier(train: Dataset, test: Dataset, kind: str = "logreg",
                          seed: int = 0) -> list[EvalReport]:
    """Fit on ``train`` and score on ``test``.

    Binary labels yield ``roc_auc`` and ``accuracy``; multiclass labels yield
    ``accuracy`` and ``macro_f1``.  Both classifiers are deterministic, the
    seed is only recorded.
    """
    if not train.schema.compatible_with(test.schema):
        raise SchemaMismatch("train and test datasets use different schemas")
    if len(np.unique(train.y)) < 2:
        raise SingleClassTrain("training data contains a single class")
    if kind == "logreg":
        model = LogisticRegression()
    elif kind == "nearest_centroid":
        model = NearestCentroid()
    else:
        raise InvalidConfig(f"unknown classifier {kind!r}", "classifier")
    k = train.num_classes
    model.fit(train.features(), train.y, k)
    proba = model.predict_proba(test.features())
    pred = np.argmax(proba, axis=1)
    acc = EvalReport("accuracy", float(np.mean(pred == test.y)), kind, seed)
    if k == 2:
        return [EvalReport("roc_auc", roc_auc(test.y == 1, proba[:, 1]), kind, seed), acc]
    return [acc, EvalReport("macro_f1", macro_f1(test.y, pred, k), kind, seed)]


def mode_coverage(points, labels, mixture: GridMixture, min_count: int = 10,
                  radius_stds: float = 3.0) -> float:
    """Fraction of components with >= ``min_count`` correctly-labeled samples nearby."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        return 0.0
    dist = np.linalg.norm(points[:, None, :] - mixture.means[None], axis=-1)
    near = dist <= radius_stds * mixture.std
    right_class = labels[:, None] == mixture.component_class[None, :]
    covered = (near & right_class).sum(axis=0) >= min_count
    return float(covered.sum()) / mixture.num_components
