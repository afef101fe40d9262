"""Shared construction helpers for the test suite."""

from __future__ import annotations

import numpy as np

from distilselect.core import ProbDist, PseudoLabeledSample, Sample
from distilselect.student import StudentParams, batch_loss, train_step


def mass_probs(conf: float, label: int, k: int) -> np.ndarray:
    """Teacher-style vector: mass `conf` on `label`, remainder uniform."""
    probs = np.full(k, (1.0 - conf) / (k - 1))
    probs[label] = conf
    return probs


def make_pls(
    sample_id: int,
    conf: float,
    label: int,
    k: int,
    features: np.ndarray | None = None,
    gold: int | None = None,
    d: int = 4,
) -> PseudoLabeledSample:
    if features is None:
        features = np.zeros(d)
    sample = Sample(id=sample_id, features=features, gold_label=gold)
    return PseudoLabeledSample(
        sample=sample,
        pseudo_label=label,
        teacher_probs=ProbDist(mass_probs(conf, label, k)),
        confidence=conf,
    )


def random_batch(rng: np.random.Generator, b: int, k: int, d: int, id_base: int = 0):
    """Batch with random confidences in (1/k, 1], labels, gaussian features."""
    batch = []
    for i in range(b):
        conf = float(rng.uniform(1.0 / k + 1e-6, 1.0))
        label = int(rng.integers(k))
        gold = int(rng.integers(k))
        batch.append(
            make_pls(
                id_base + i,
                conf,
                label,
                k,
                features=rng.standard_normal(d),
                gold=gold,
            )
        )
    return batch


def numeric_gradient(params, batch, mask, weights, step=1e-5):
    """Central finite differences of batch_loss over the flattened parameters."""
    k, d = params.weights.shape
    flat = np.concatenate([params.weights.ravel(), params.bias])
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (+1, -1):
            bumped = flat.copy()
            bumped[i] += sign * step
            p = StudentParams(
                weights=bumped[: k * d].reshape(k, d),
                bias=bumped[k * d :],
                learning_rate=params.learning_rate,
            )
            grad[i] += sign * batch_loss(p, batch, mask, weights)
    return grad / (2 * step)


def analytic_gradient(params, batch, mask, weights):
    """Recovered from one SGD step: grad = (params - stepped) / lr."""
    stepped = train_step(params, batch, mask, weights)
    gw = (params.weights - stepped.weights) / params.learning_rate
    gb = (params.bias - stepped.bias) / params.learning_rate
    return np.concatenate([gw.ravel(), gb])
