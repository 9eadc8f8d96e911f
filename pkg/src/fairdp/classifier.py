"""Multinomial logistic model: probabilities, cross-entropy, and Jacobians.

The optimizer only consumes (loss, loss_grad, predict_proba, jacobian_proba),
so any differentiable classifier exposing the same surface can be swapped in.
Parameter vectors are flattened as concat(weights row-major, bias).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Probabilities below this are clamped inside loss() so a saturated wrong
# prediction yields a large finite loss; gradients use the analytic form.
PROB_FLOOR = 1e-30


@dataclass(frozen=True)
class ModelParams:
    """Weights (l, d_x) and bias (l,) of a softmax-linear classifier."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        bias = np.array(self.bias, dtype=np.float64)
        if weights.ndim != 2 or bias.ndim != 1 or weights.shape[0] != bias.shape[0]:
            raise ValueError("weights must be (l, d_x) with a matching length-l bias")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ValueError("model parameters must be finite")
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def l(self) -> int:
        return self.weights.shape[0]

    @property
    def d_x(self) -> int:
        return self.weights.shape[1]

    @property
    def d_theta(self) -> int:
        return self.l * self.d_x + self.l

    @classmethod
    def zeros(cls, l: int, d_x: int) -> "ModelParams":
        return cls(np.zeros((l, d_x)), np.zeros(l))

    @classmethod
    def from_vector(cls, vec: np.ndarray, l: int, d_x: int) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (l * d_x + l,):
            raise ValueError(f"expected a length-{l * d_x + l} vector")
        return cls(vec[: l * d_x].reshape(l, d_x), vec[l * d_x :])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])


def predict_proba(theta: ModelParams, x: np.ndarray) -> np.ndarray:
    """Softmax of weights @ x + bias, computed with max subtraction.

    Accepts a single feature vector (d_x,) or a batch (n, d_x); the result
    lies on the probability simplex row-wise.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != theta.d_x:
        raise ValueError(f"expected feature dimension {theta.d_x}, got {x.shape[-1]}")
    logits = x @ theta.weights.T + theta.bias
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits")
    logits = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(logits)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_label(theta: ModelParams, x: np.ndarray):
    """Argmax class in 1..l; ties break toward the smallest index."""
    probs = predict_proba(theta, x)
    labels = np.argmax(probs, axis=-1) + 1
    return labels if labels.ndim else int(labels)


def loss(theta: ModelParams, x: np.ndarray, y: int) -> float:
    """Cross-entropy -log F_y(x, theta), capped at -log(PROB_FLOOR)."""
    if not 1 <= y <= theta.l:
        raise ValueError(f"label {y} out of range 1..{theta.l}")
    p = predict_proba(theta, x)[y - 1]
    return float(-np.log(max(p, PROB_FLOOR)))


def loss_grad(theta: ModelParams, x: np.ndarray, y: int) -> np.ndarray:
    """Exact gradient of loss() in the flattened parameter vector."""
    if not 1 <= y <= theta.l:
        raise ValueError(f"label {y} out of range 1..{theta.l}")
    x = np.asarray(x, dtype=np.float64)
    dlogits = predict_proba(theta, x)
    dlogits[y - 1] -= 1.0
    return np.concatenate([np.outer(dlogits, x).ravel(), dlogits])


def jacobian_proba(theta: ModelParams, x: np.ndarray) -> np.ndarray:
    """(l, d_theta) matrix whose row j is the gradient of F_j(x, theta).

    Rows sum to zero because the probabilities sum to one.
    """
    x = np.asarray(x, dtype=np.float64)
    probs = predict_proba(theta, x)
    # dF/dlogits = diag(F) - F F^T, then chain through logits = Wx + b
    a = np.diag(probs) - np.outer(probs, probs)
    weight_part = a[:, :, None] * x[None, None, :]
    return np.concatenate([weight_part.reshape(theta.l, -1), a], axis=1)


def mean_loss(theta: ModelParams, features: np.ndarray, labels: np.ndarray) -> float:
    """Average cross-entropy over a sample set."""
    probs = predict_proba(theta, features)
    picked = probs[np.arange(labels.shape[0]), np.asarray(labels) - 1]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def mean_loss_grad(
    theta: ModelParams,
    features: np.ndarray,
    labels: np.ndarray,
    clip: float | None = None,
) -> np.ndarray:
    """Batch-averaged loss gradient, with optional per-sample l2 clipping.

    Clipping rescales each sample's gradient to norm at most `clip` before
    averaging; the per-sample norm is ||F - onehot(y)|| * sqrt(||x||^2 + 1).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    m = labels.shape[0]
    dlogits = predict_proba(theta, features)
    dlogits[np.arange(m), labels - 1] -= 1.0
    if clip is not None:
        norms = np.linalg.norm(dlogits, axis=1) * np.sqrt(
            (features ** 2).sum(axis=1) + 1.0
        )
        dlogits = dlogits * np.minimum(1.0, clip / np.maximum(norms, 1e-300))[:, None]
    grad_w = dlogits.T @ features / m
    return np.concatenate([grad_w.ravel(), dlogits.mean(axis=0)])


def proba_lipschitz_bound(features: np.ndarray) -> float:
    """Upper bound on ||jacobian_proba||_F over the given feature rows.

    ||diag(F) - F F^T||_F <= 1/2 on the simplex, so the Jacobian norm is at
    most 0.5 * sqrt(max ||x||^2 + 1). This is the Lipschitz constant of the
    probability map used by noise calibration and the sensitivity audit.
    """
    features = np.asarray(features, dtype=np.float64)
    return float(0.5 * np.sqrt((features ** 2).sum(axis=-1).max() + 1.0))


def save_checkpoint(theta: ModelParams, path, metadata: dict | None = None) -> None:
    """Serialize dims, row-major weights, bias and encoding metadata as JSON."""
    payload = {
        "l": theta.l,
        "d_x": theta.d_x,
        "weights": theta.weights.ravel().tolist(),
        "bias": theta.bias.tolist(),
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    l, d_x = int(payload["l"]), int(payload["d_x"])
    theta = ModelParams(
        np.array(payload["weights"], dtype=np.float64).reshape(l, d_x),
        np.array(payload["bias"], dtype=np.float64),
    )
    return theta, payload.get("metadata", {})
