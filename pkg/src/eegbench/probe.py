"""Linear probing of frozen embeddings: multinomial logistic regression
trained by mini-batch gradient descent with decoupled weight decay, warmup +
cosine learning-rate decay, and best-validation-loss checkpointing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DegenerateInput, DimensionMismatch


@dataclass
class EmbeddingSet:
    features: np.ndarray  # n x d
    labels: np.ndarray  # n class indices
    subject_ids: list[str]
    epoch_ids: np.ndarray
    model_tag: str = "unknown"
    n_classes: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.epoch_ids = np.asarray(self.epoch_ids, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a non-empty n x d matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN/Inf")
        if self.n_classes is None:
            self.n_classes = int(self.labels.max()) + 1 if len(self.labels) else 2
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels outside [0, {self.n_classes})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class ProbeModel:
    W: np.ndarray  # K x d
    b: np.ndarray  # K
    n_classes: int
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    train_log: list[tuple[float, float]] = field(default_factory=list)  # (train, val) loss


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(model: ProbeModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.W.shape[1]:
        raise DimensionMismatch(
            f"features have {features.shape[-1]} dims, model expects {model.W.shape[1]}"
        )
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain NaN/Inf")
    if model.feature_mean is not None:
        features = (features - model.feature_mean) / model.feature_scale
    return softmax(features @ model.W.T + model.b)


def cross_entropy(model: ProbeModel, X: np.ndarray, y: np.ndarray,
                  weight_decay: float = 0.0) -> float:
    proba = softmax(X @ model.W.T + model.b)
    nll = -np.log(proba[np.arange(len(y)), y] + 1e-300).mean()
    return float(nll + 0.5 * weight_decay * np.sum(model.W ** 2))


def gradient(model: ProbeModel, X: np.ndarray, y: np.ndarray,
             weight_decay: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of mean cross-entropy + L2 penalty w.r.t. (W, b)."""
    if len(X) == 0:
        raise ValueError("empty batch")
    proba = softmax(X @ model.W.T + model.b)
    delta = proba.copy()
    delta[np.arange(len(y)), y] -= 1.0
    grad_W = delta.T @ X / len(X) + weight_decay * model.W
    grad_b = delta.mean(axis=0)
    return grad_W, grad_b


class LinearProbe(BaseEstimator, ClassifierMixin):
    """sklearn-style multinomial logistic-regression probe.

    Weights start at zero (the objective is convex, so initialization only
    affects the path, not the optimum). Per-dimension z-scoring of the input
    features is fit on the training set. The parameters kept are those with
    the lowest validation loss seen during training.
    """

    def __init__(self, lr=1e-2, weight_decay=0.0, max_epochs=30, batch_size=64,
                 seed=0, standardize=True, patience=5, warmup_frac=0.1):
        self.lr = lr
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.seed = seed
        self.standardize = standardize
        self.patience = patience
        self.warmup_frac = warmup_frac

    def _schedule(self, epoch: int) -> float:
        warmup = max(1, int(round(self.warmup_frac * self.max_epochs)))
        if epoch < warmup:
            return self.lr * (epoch + 1) / warmup
        span = max(1, self.max_epochs - warmup)
        return self.lr * 0.5 * (1.0 + np.cos(np.pi * (epoch - warmup) / span))

    def fit(self, X, y, X_val=None, y_val=None, n_classes=None):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        k = int(n_classes if n_classes is not None else y.max() + 1)
        if len(X) < k:
            raise DegenerateInput(f"{len(X)} training samples for {k} classes")
        if X_val is not None:
            X_val = np.asarray(X_val, dtype=np.float64)
            y_val = np.asarray(y_val, dtype=np.int64)
            if X_val.shape[1] != X.shape[1]:
                raise DimensionMismatch(
                    f"train d={X.shape[1]} but val d={X_val.shape[1]}"
                )

        mean = scale = None
        if self.standardize:
            mean = X.mean(axis=0)
            scale = X.std(axis=0) + 1e-8
            X = (X - mean) / scale
            if X_val is not None:
                X_val = (X_val - mean) / scale

        d = X.shape[1]
        model = ProbeModel(W=np.zeros((k, d)), b=np.zeros(k), n_classes=k)
        rng = np.random.default_rng(self.seed)
        best = (np.inf, model.W.copy(), model.b.copy())
        stale = 0
        for epoch in range(self.max_epochs):
            lr = self._schedule(epoch)
            order = rng.permutation(len(X))
            for start in range(0, len(X), self.batch_size):
                batch = order[start : start + self.batch_size]
                grad_W, grad_b = gradient(model, X[batch], y[batch])
                model.W -= lr * (grad_W + self.weight_decay * model.W)
                model.b -= lr * grad_b
            train_loss = cross_entropy(model, X, y)
            if X_val is not None and len(X_val):
                val_loss = cross_entropy(model, X_val, y_val)
            else:
                val_loss = train_loss
            model.train_log.append((train_loss, val_loss))
            if val_loss < best[0] - 1e-12:
                best = (val_loss, model.W.copy(), model.b.copy())
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break

        model.W, model.b = best[1], best[2]
        model.feature_mean = mean
        model.feature_scale = scale
        self.model_ = model
        self.classes_ = np.arange(k)
        return self

    def predict_proba(self, X):
        return predict_proba(self.model_, X)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)


def train_probe(train: EmbeddingSet, val: EmbeddingSet, cfg: dict | None = None) -> ProbeModel:
    """Train a probe on frozen embeddings, selecting the lowest-val-loss epoch."""
    cfg = dict(cfg or {})
    if train.d != val.d:
        raise DimensionMismatch(f"train d={train.d} but val d={val.d}")
    k = max(train.n_classes or 2, val.n_classes or 2)
    probe = LinearProbe(
        lr=cfg.get("lr", 1e-2),
        weight_decay=cfg.get("weight_decay", 0.0),
        max_epochs=cfg.get("max_epochs", 30),
        batch_size=cfg.get("batch", 64),
        seed=cfg.get("seed", 0),
        standardize=cfg.get("standardize", True),
        patience=cfg.get("patience", 5),
    )
    probe.fit(train.features, train.labels, val.features, val.labels, n_classes=k)
    return probe.model_
