"""Sample, label, and probability-vector primitives.

Everything here is a plain immutable value: frozen dataclasses over numpy
arrays, validated on construction. The three elementary signals the rest of
the package is built on live here as pure functions: the argmax label of a
probability vector, its maximum entry (confidence), and its Shannon entropy
(uncertainty).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Probability vectors are rejected (never renormalized) when the sum drifts
# past this tolerance, so ingestion bugs surface instead of being masked.
PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class LabelSet:
    """Ordered collection of class names; position in `names` is the label index."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        names = tuple(str(n) for n in self.names)
        if len(names) < 2:
            raise ValueError("a label set needs at least 2 labels")
        if len(set(names)) != len(names):
            raise ValueError("label names must be unique")
        object.__setattr__(self, "names", names)

    @property
    def k(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class ProbDist:
    """Probability vector: nonnegative entries summing to 1 within ``PROB_SUM_TOL``."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.probs, dtype=float, copy=True)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("probs must be a 1-d vector of length >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probs must be finite")
        if np.any(arr < 0.0):
            raise ValueError("probs must be nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probs sum {total!r} out of tolerance")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def k(self) -> int:
        return int(self.probs.size)


def _as_array(p: ProbDist | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(p, ProbDist):
        return p.probs
    return np.asarray(p, dtype=float)


def argmax_label(p: ProbDist | Sequence[float] | np.ndarray) -> int:
    """Index of the largest entry; ties broken by the lowest index."""
    return int(np.argmax(_as_array(p)))


def confidence(p: ProbDist | Sequence[float] | np.ndarray) -> float:
    """Maximum entry of the distribution, in [1/K, 1] for a valid vector."""
    return float(np.max(_as_array(p)))


def entropy(p: ProbDist | Sequence[float] | np.ndarray) -> float:
    """Shannon entropy -sum(p * ln p) with the 0*ln(0) = 0 convention.

    The result is clamped into [0, ln K] so that downstream range assertions
    hold even for vectors at the edge of the normalization tolerance; the
    clamp is a no-op for exactly normalized input.
    """
    arr = _as_array(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(arr > 0.0, arr * np.log(arr), 0.0)
    value = -float(terms.sum())
    return min(max(value, 0.0), math.log(arr.size))


@dataclass(frozen=True)
class Sample:
    """One data point: integer id, dense feature vector, optional gold label.

    Gold labels are present on validation/test samples and, for synthetic
    data, on training samples where they are used for evaluation only.
    """

    id: int
    features: np.ndarray
    gold_label: int | None = None

    def __post_init__(self) -> None:
        if int(self.id) != self.id or self.id < 0:
            raise ValueError("sample id must be a nonnegative integer")
        feats = np.array(self.features, dtype=float, copy=True)
        if feats.ndim != 1 or feats.size < 1:
            raise ValueError("features must be a nonempty 1-d vector")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        feats.setflags(write=False)
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "features", feats)
        if self.gold_label is not None:
            gold = int(self.gold_label)
            if gold < 0:
                raise ValueError("gold_label must be a nonnegative label index")
            object.__setattr__(self, "gold_label", gold)

    @property
    def dim(self) -> int:
        return int(self.features.size)


@dataclass(frozen=True)
class PseudoLabeledSample:
    """A sample together with its teacher pseudo-label, probabilities, and confidence."""

    sample: Sample
    pseudo_label: int
    teacher_probs: ProbDist
    confidence: float

    def __post_init__(self) -> None:
        pl = int(self.pseudo_label)
        if pl != argmax_label(self.teacher_probs):
            raise ValueError("label/argmax mismatch")
        mx = confidence(self.teacher_probs)
        if float(self.confidence) != mx:
            raise ValueError("confidence must equal the maximum teacher probability")
        object.__setattr__(self, "pseudo_label", pl)
        object.__setattr__(self, "confidence", float(self.confidence))

    @classmethod
    def from_probs(
        cls, sample: Sample, probs: ProbDist | Sequence[float] | np.ndarray
    ) -> "PseudoLabeledSample":
        """Build a record with the label and confidence recomputed from `probs`."""
        dist = probs if isinstance(probs, ProbDist) else ProbDist(np.asarray(probs, dtype=float))
        return cls(
            sample=sample,
            pseudo_label=argmax_label(dist),
            teacher_probs=dist,
            confidence=confidence(dist),
        )


def _check_ids_disjoint(*groups: Sequence) -> None:
    seen: set[int] = set()
    for group in groups:
        for item in group:
            sid = item.sample.id if isinstance(item, PseudoLabeledSample) else item.id
            if sid in seen:
                raise ValueError(f"sample id {sid} appears in more than one split")
            seen.add(sid)


def _check_shared_dim(samples: Sequence[Sample]) -> int:
    dims = {s.dim for s in samples}
    if len(dims) > 1:
        raise ValueError(f"samples disagree on feature dimension: {sorted(dims)}")
    return dims.pop() if dims else 0


@dataclass(frozen=True)
class DatasetSplit:
    """Pseudo-labeled train split plus gold-labeled validation and test splits."""

    train: tuple[PseudoLabeledSample, ...]
    val: tuple[Sample, ...]
    test: tuple[Sample, ...]

    def __post_init__(self) -> None:
        train = tuple(self.train)
        val = tuple(self.val)
        test = tuple(self.test)
        for name, group in (("val", val), ("test", test)):
            for s in group:
                if s.gold_label is None:
                    raise ValueError(f"{name} sample {s.id} is missing a gold label")
        _check_ids_disjoint(train, val, test)
        _check_shared_dim([p.sample for p in train] + list(val) + list(test))
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "val", val)
        object.__setattr__(self, "test", test)
