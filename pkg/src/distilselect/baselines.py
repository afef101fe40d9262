"""Reference selectors the adaptive dual gate is compared against.

Ratio-based kinds keep exactly ceil(ratio * B) samples per batch so every
method sees the identical batch stream and only the selection rule differs.
The two single-gate kinds reuse the adaptive selector with one indicator
forced to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import PseudoLabeledSample, entropy
from .selector import ThresholdState, select

RANDOM = "random"
NO_SELECTION = "no_selection"
ENTROPY_SCORE = "entropy_score"
TOP_UNCERTAINTY = "top_uncertainty"
FIXED_CONF_THRESHOLD = "fixed_conf_threshold"
STUDENT_GATE_ONLY = "student_gate_only"  # teacher indicator forced to 1
TEACHER_GATE_ONLY = "teacher_gate_only"  # student indicator forced to 1

BASELINE_KINDS = (
    RANDOM,
    NO_SELECTION,
    ENTROPY_SCORE,
    TOP_UNCERTAINTY,
    FIXED_CONF_THRESHOLD,
    STUDENT_GATE_ONLY,
    TEACHER_GATE_ONLY,
)
RATIO_KINDS = (RANDOM, ENTROPY_SCORE, TOP_UNCERTAINTY)
GATE_KINDS = (STUDENT_GATE_ONLY, TEACHER_GATE_ONLY)

# Ratio grid swept when picking a fixed-ratio baseline by validation score.
DEFAULT_RATIO_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    ratio: float | None = None
    threshold: float | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.kind in RATIO_KINDS:
            if self.ratio is None:
                raise ValueError(f"baseline {self.kind!r} requires a ratio")
            if not 0.0 < self.ratio <= 1.0:
                raise ValueError("ratio must lie in (0, 1]")
        elif self.ratio is not None:
            raise ValueError(f"baseline {self.kind!r} does not take a ratio")
        if self.kind == FIXED_CONF_THRESHOLD:
            if self.threshold is None:
                raise ValueError("fixed_conf_threshold requires a threshold")
        elif self.threshold is not None:
            raise ValueError(f"baseline {self.kind!r} does not take a threshold")


def _ratio_count(ratio: float, batch_size: int) -> int:
    return math.ceil(ratio * batch_size)


def _mask_from_indices(indices: Sequence[int], batch_size: int) -> tuple[int, ...]:
    mask = [0] * batch_size
    for i in indices:
        mask[int(i)] = 1
    return tuple(mask)


def baseline_mask(
    spec: BaselineSpec,
    batch: Sequence[PseudoLabeledSample],
    uncertainties: Sequence[float],
    *,
    student_state: ThresholdState | None = None,
    teacher_state: ThresholdState | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[int, ...]:
    """Selection mask for one batch under the given baseline rule.

    `rng` must be a persistent stream for the random kind (a fresh generator
    per call would repeat the same subset every batch); the gate-only kinds
    need the already-updated threshold states. Ties in the sorted kinds
    resolve to the lowest index.
    """
    b = len(batch)
    if b == 0:
        raise ValueError("batch must be nonempty")
    if len(uncertainties) != b:
        raise ValueError("batch and uncertainties must have equal length")

    if spec.kind == NO_SELECTION:
        return (1,) * b
    if spec.kind == RANDOM:
        if rng is None:
            raise ValueError("random baseline requires an rng stream")
        n = _ratio_count(spec.ratio, b)
        return _mask_from_indices(rng.choice(b, size=n, replace=False), b)
    if spec.kind == ENTROPY_SCORE:
        ent = np.array([entropy(p.teacher_probs) for p in batch])
        order = np.argsort(ent, kind="stable")
        return _mask_from_indices(order[: _ratio_count(spec.ratio, b)], b)
    if spec.kind == TOP_UNCERTAINTY:
        u = np.asarray(uncertainties, dtype=float)
        order = np.argsort(-u, kind="stable")
        return _mask_from_indices(order[: _ratio_count(spec.ratio, b)], b)
    if spec.kind == FIXED_CONF_THRESHOLD:
        return tuple(1 if p.confidence >= spec.threshold else 0 for p in batch)
    if spec.kind in GATE_KINDS:
        if student_state is None or teacher_state is None:
            raise ValueError(f"baseline {spec.kind!r} requires both threshold states")
        result = select(
            batch,
            uncertainties,
            student_state,
            teacher_state,
            force_teacher_trivial=spec.kind == STUDENT_GATE_ONLY,
            force_student_trivial=spec.kind == TEACHER_GATE_ONLY,
        )
        return result.mask
    raise AssertionError(f"unhandled baseline kind {spec.kind!r}")
