"""Linear softmax student classifier trained by plain SGD.

The selection machinery only ever consumes the student's predicted label
distribution, so the smallest faithful model is a linear softmax over the
feature vector. ``forward`` is the swap-in point for anything richer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ProbDist, PseudoLabeledSample, Sample
from .metrics import accuracy as _accuracy
from .metrics import macro_f1 as _macro_f1


@dataclass(frozen=True)
class StudentParams:
    """Weight matrix (K x d), bias vector (K,) and the SGD learning rate."""

    weights: np.ndarray
    bias: np.ndarray
    learning_rate: float

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float, copy=True)
        b = np.array(self.bias, dtype=float, copy=True)
        if w.ndim != 2:
            raise ValueError("weights must be a K x d matrix")
        if b.ndim != 1 or b.size != w.shape[0]:
            raise ValueError("bias length must match the number of classes")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be positive and finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "learning_rate", float(self.learning_rate))

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])

    @classmethod
    def zeros(cls, num_classes: int, dim: int, learning_rate: float) -> "StudentParams":
        """All-zero parameters: a uniform, maximum-entropy cold start."""
        return cls(
            weights=np.zeros((num_classes, dim)),
            bias=np.zeros(num_classes),
            learning_rate=learning_rate,
        )


def _check_dim(params: StudentParams, dim: int) -> None:
    if dim != params.dim:
        raise ValueError(f"feature dimension {dim} does not match parameters ({params.dim})")


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward_batch(params: StudentParams, features: np.ndarray) -> np.ndarray:
    """Row-wise softmax(W x + b) for a (B, d) feature matrix; returns (B, K)."""
    feats = np.asarray(features, dtype=float)
    if feats.ndim != 2:
        raise ValueError("features must be a (B, d) matrix")
    _check_dim(params, feats.shape[1])
    logits = feats @ params.weights.T + params.bias
    return _softmax_rows(logits)


def forward(params: StudentParams, sample: Sample) -> ProbDist:
    """Predicted label distribution for one sample."""
    _check_dim(params, sample.dim)
    return ProbDist(forward_batch(params, sample.features[None, :])[0])


def entropy_rows(probs: np.ndarray) -> np.ndarray:
    """Per-row Shannon entropy of a (B, K) probability matrix, clamped to [0, ln K]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return np.clip(-terms.sum(axis=1), 0.0, math.log(probs.shape[1]))


def uncertainty(params: StudentParams, sample: Sample) -> float:
    """Entropy of the student's predicted distribution, in [0, ln K]."""
    return float(entropy_rows(forward_batch(params, sample.features[None, :]))[0])


def uncertainty_batch(params: StudentParams, features: np.ndarray) -> np.ndarray:
    return entropy_rows(forward_batch(params, features))


def _stack_features(batch: Sequence[PseudoLabeledSample]) -> np.ndarray:
    return np.stack([p.sample.features for p in batch])


def _validate_batch_args(
    batch: Sequence[PseudoLabeledSample],
    mask: Sequence[int],
    weights: Sequence[float],
) -> tuple[np.ndarray, np.ndarray]:
    if not (len(batch) == len(mask) == len(weights)):
        raise ValueError("batch, mask, and weights must have equal length")
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    mask_arr = np.asarray(mask, dtype=float)
    weight_arr = np.asarray(weights, dtype=float)
    if np.any(weight_arr < 0.0):
        raise ValueError("weights must be nonnegative")
    if not set(np.unique(mask_arr)).issubset({0.0, 1.0}):
        raise ValueError("mask entries must be 0 or 1")
    return mask_arr, weight_arr


def batch_loss(
    params: StudentParams,
    batch: Sequence[PseudoLabeledSample],
    mask: Sequence[int],
    weights: Sequence[float],
) -> float:
    """Mean weighted, masked cross-entropy against the pseudo-labels.

    Returns (1/B) * sum_i weights_i * mask_i * (-ln p_i[pseudo_label_i]).
    The divisor is always the full batch size B, not the selected count, and
    a fully masked batch yields exactly 0.
    """
    mask_arr, weight_arr = _validate_batch_args(batch, mask, weights)
    probs = forward_batch(params, _stack_features(batch))
    labels = np.array([p.pseudo_label for p in batch])
    with np.errstate(divide="ignore"):
        losses = -np.log(probs[np.arange(len(batch)), labels])
    contrib = np.where(mask_arr > 0.0, weight_arr * losses, 0.0)
    return float(contrib.sum() / len(batch))


def train_step(
    params: StudentParams,
    batch: Sequence[PseudoLabeledSample],
    mask: Sequence[int],
    weights: Sequence[float],
) -> StudentParams:
    """One SGD step on ``batch_loss``; returns updated parameters.

    The per-sample gradient contribution is (weights_i * mask_i / B) times
    (p - onehot(pseudo_label_i)), outer-producted with the features for the
    weight matrix and taken alone for the bias. A fully masked batch leaves
    the parameters unchanged exactly.
    """
    mask_arr, weight_arr = _validate_batch_args(batch, mask, weights)
    feats = _stack_features(batch)
    probs = forward_batch(params, feats)
    labels = np.array([p.pseudo_label for p in batch])
    delta = probs.copy()
    delta[np.arange(len(batch)), labels] -= 1.0
    delta *= (weight_arr * mask_arr / len(batch))[:, None]
    grad_w = delta.T @ feats
    grad_b = delta.sum(axis=0)
    return StudentParams(
        weights=params.weights - params.learning_rate * grad_w,
        bias=params.bias - params.learning_rate * grad_b,
        learning_rate=params.learning_rate,
    )


def predict_batch(params: StudentParams, features: np.ndarray) -> np.ndarray:
    """Argmax labels for a (B, d) feature matrix; ties resolve to the lowest index."""
    return np.argmax(forward_batch(params, features), axis=1)


def evaluate(params: StudentParams, samples: Sequence[Sample]) -> tuple[float, float]:
    """Accuracy and macro-F1 of the student's argmax predictions on gold labels."""
    if len(samples) == 0:
        raise ValueError("cannot evaluate on an empty sample list")
    golds = []
    for s in samples:
        if s.gold_label is None:
            raise ValueError(f"sample {s.id} has no gold label")
        golds.append(s.gold_label)
    feats = np.stack([s.features for s in samples])
    preds = predict_batch(params, feats)
    return _accuracy(preds, golds), _macro_f1(preds, golds, params.num_classes)


CHECKPOINT_VERSION = 1


def save_params(path: str | Path, params: StudentParams) -> None:
    """Write parameters as text: a `version K d` header, then weights and bias rows."""
    lines = [f"{CHECKPOINT_VERSION} {params.num_classes} {params.dim}"]
    for row in params.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(" ".join(repr(float(v)) for v in params.bias))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(path: str | Path, learning_rate: float) -> StudentParams:
    """Read a checkpoint written by ``save_params``; the learning rate is supplied by the caller."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty checkpoint")
    header = lines[0].split()
    if len(header) != 3 or int(header[0]) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint header {lines[0]!r}")
    k, d = int(header[1]), int(header[2])
    if len(lines) != 1 + k + 1:
        raise ValueError(f"{path}: expected {k + 1} parameter rows, found {len(lines) - 1}")
    weights = np.array([[float(v) for v in lines[1 + i].split()] for i in range(k)])
    bias = np.array([float(v) for v in lines[1 + k].split()])
    if weights.shape != (k, d) or bias.shape != (k,):
        raise ValueError(f"{path}: parameter rows do not match the declared shape")
    return StudentParams(weights=weights, bias=bias, learning_rate=learning_rate)
