"""Base loss functions: linear logistic models and the zero-one error.

Binary models use a single weight row and labels in {-1, +1}; multiclass
models keep one weight row per class and integer class labels.  The bias is
folded in as a constant-1 feature appended at evaluation time, so gradients
always have the same shape as the weight matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

__all__ = [
    "LinearModel",
    "LossBatch",
    "binary_logistic",
    "multiclass_logistic",
    "loss_batch",
    "loss_values",
    "predict_classes",
    "zero_one_error",
]


@dataclass
class LinearModel:
    """Linear scorer with weights of shape (classes, features).

    ``classes`` is 1 for binary models.  When ``includes_bias`` is set, a
    constant-1 feature is appended to every input, so ``features`` counts
    the raw input dimension plus one.
    """

    weights: np.ndarray
    includes_bias: bool = True

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[0]


@dataclass
class LossBatch:
    """Per-example losses and per-example loss gradients at a fixed model."""

    values: np.ndarray
    grads: np.ndarray  # shape (n,) + weights.shape

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.grads = np.asarray(self.grads, dtype=float)
        if self.values.shape[0] != self.grads.shape[0]:
            raise ValueError(
                f"values and grads length mismatch: "
                f"{self.values.shape[0]} vs {self.grads.shape[0]}"
            )

    def __len__(self) -> int:
        return self.values.shape[0]


def _augment_rows(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """Bring features to shape (n, d), appending the bias column if needed."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if model.includes_bias:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    if X.shape[1] != model.weights.shape[1]:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match "
            f"model dimension {model.weights.shape[1]}"
        )
    return X


def binary_logistic(model: LinearModel, features, label: int):
    """Binary logistic loss log(1 + exp(-y * <w, x>)) and its gradient.

    ``label`` must be -1 or +1.  Uses log1p/expit formulations so large
    margins neither overflow nor lose the tail.
    """
    if label not in (-1, 1):
        raise ValueError(f"binary label must be -1 or +1, got {label!r}")
    if model.n_outputs != 1:
        raise ValueError("binary_logistic requires a single-output model")
    x = _augment_rows(model, features)[0]
    t = -label * float(x @ model.weights[0])
    loss = float(np.logaddexp(0.0, t))
    grad = (-label * expit(t)) * x
    return loss, grad.reshape(model.weights.shape)


def multiclass_logistic(model: LinearModel, features, label: int):
    """Multiclass logistic loss logsumexp(s) - s[label] and its gradient."""
    k = model.n_outputs
    if k < 2:
        raise ValueError("multiclass_logistic requires >= 2 output rows")
    if not 0 <= int(label) < k:
        raise ValueError(f"label {label!r} out of range [0, {k})")
    x = _augment_rows(model, features)[0]
    scores = model.weights @ x
    lse = logsumexp(scores)
    loss = float(lse - scores[int(label)])
    p = np.exp(scores - lse)
    p[int(label)] -= 1.0
    return loss, np.outer(p, x)


def _binary_batch(model, X, labels):
    # class indices {0, 1} -> signs {-1, +1}
    y = 2.0 * np.asarray(labels, dtype=float) - 1.0
    t = -y * (X @ model.weights[0])
    values = np.logaddexp(0.0, t)
    grads = ((-y * expit(t))[:, None] * X)[:, None, :]
    return values, grads


def _multiclass_batch(model, X, labels):
    labels = np.asarray(labels, dtype=int)
    scores = X @ model.weights.T
    lse = logsumexp(scores, axis=1)
    values = lse - scores[np.arange(len(labels)), labels]
    p = np.exp(scores - lse[:, None])
    p[np.arange(len(labels)), labels] -= 1.0
    grads = p[:, :, None] * X[:, None, :]
    return values, grads


def loss_batch(model: LinearModel, features, labels) -> LossBatch:
    """Vectorized per-example losses and gradients over a feature matrix.

    ``labels`` are class indices (0..K-1); for single-output models index 1
    is mapped to +1 and index 0 to -1 before applying the binary loss.
    """
    X = _augment_rows(model, features)
    if model.n_outputs == 1:
        values, grads = _binary_batch(model, X, labels)
    else:
        values, grads = _multiclass_batch(model, X, labels)
    return LossBatch(values=values, grads=grads)


def loss_values(model: LinearModel, features, labels) -> np.ndarray:
    """Per-example loss values only (no gradients); used for metrics."""
    X = _augment_rows(model, features)
    if model.n_outputs == 1:
        y = 2.0 * np.asarray(labels, dtype=float) - 1.0
        return np.logaddexp(0.0, -y * (X @ model.weights[0]))
    scores = X @ model.weights.T
    lse = logsumexp(scores, axis=1)
    return lse - scores[np.arange(scores.shape[0]), np.asarray(labels, dtype=int)]


def predict_classes(model: LinearModel, features) -> np.ndarray:
    """Predicted class indices; ties resolve to the lowest class index."""
    X = _augment_rows(model, features)
    if model.n_outputs == 1:
        # score exactly 0 predicts class 0 (the lower index)
        return (X @ model.weights[0] > 0.0).astype(int)
    return np.argmax(X @ model.weights.T, axis=1)


def zero_one_error(model: LinearModel, features, labels) -> float:
    """Fraction of examples whose prediction mismatches the label."""
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        raise ValueError("zero_one_error requires a nonempty dataset")
    return float(np.mean(predict_classes(model, features) != labels))
