"""Evaluation metrics and per-run bookkeeping.

Accuracy and macro-F1 for classifier evaluation, equal-width calibration
binning of a score against correctness, before/after-selection accuracy
records, and the run ledger that accumulates per-step and per-evaluation
rows for the data-efficiency accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import PseudoLabeledSample


def _as_labels(values: Sequence[int], name: str, k: int | None = None) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must contain integer labels")
    if np.any(arr < 0):
        raise ValueError(f"{name} contains a negative label")
    if k is not None and np.any(arr >= k):
        raise ValueError(f"{name} contains a label outside [0, {k})")
    return arr


def accuracy(preds: Sequence[int], golds: Sequence[int]) -> float:
    p = _as_labels(preds, "preds")
    g = _as_labels(golds, "golds")
    if p.size != g.size:
        raise ValueError("preds and golds must have equal length")
    return float(np.mean(p == g))


def macro_f1(preds: Sequence[int], golds: Sequence[int], k: int) -> float:
    """Unweighted mean of per-class F1 = 2PR/(P+R).

    A class with no predicted and no gold instances contributes 0, the
    conservative convention for undefined per-class F1.
    """
    p = _as_labels(preds, "preds", k)
    g = _as_labels(golds, "golds", k)
    if p.size != g.size:
        raise ValueError("preds and golds must have equal length")
    per_class = []
    for y in range(k):
        tp = int(np.sum((p == y) & (g == y)))
        pred_count = int(np.sum(p == y))
        gold_count = int(np.sum(g == y))
        precision = tp / pred_count if pred_count > 0 else 0.0
        recall = tp / gold_count if gold_count > 0 else 0.0
        denom = precision + recall
        per_class.append(2.0 * precision * recall / denom if denom > 0 else 0.0)
    total = 0.0
    for f1 in per_class:
        total += f1
    return total / k


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    count: int
    accuracy: float | None  # None marks an empty bin


def calibration_bins(
    values: Sequence[float],
    correct: Sequence[int],
    n_bins: int,
    value_range: tuple[float, float],
) -> list[CalibrationBin]:
    """Equal-width bins of `values` over `value_range` with per-bin mean correctness."""
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not hi > lo:
        raise ValueError("value_range must be increasing")
    vals = np.asarray(values, dtype=float)
    flags = np.asarray(correct, dtype=float)
    if vals.shape != flags.shape or vals.ndim != 1:
        raise ValueError("values and correct must be 1-d sequences of equal length")
    if np.any(vals < lo - 1e-12) or np.any(vals > hi + 1e-12):
        raise ValueError("values fall outside the declared range")
    edges = np.linspace(lo, hi, n_bins + 1)
    # Values at the upper edge land in the final bin.
    idx = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        in_bin = idx == b
        count = int(in_bin.sum())
        acc = float(flags[in_bin].mean()) if count > 0 else None
        bins.append(CalibrationBin(float(edges[b]), float(edges[b + 1]), count, acc))
    return bins


@dataclass(frozen=True)
class ThresholdEvalRecord:
    """Pseudo-label quality and student agreement, before vs after selection.

    Teacher accuracy compares pseudo-labels with gold labels; student
    accuracy compares student predictions with pseudo-labels. The
    after-selection values are None when nothing was selected.
    """

    teacher_acc_before: float
    teacher_acc_after: float | None
    student_acc_before: float
    student_acc_after: float | None


def threshold_evaluation(
    batch: Sequence[PseudoLabeledSample],
    mask: Sequence[int],
    golds: Sequence[int],
    student_preds: Sequence[int],
) -> ThresholdEvalRecord:
    if not (len(batch) == len(mask) == len(golds) == len(student_preds)):
        raise ValueError("batch, mask, golds, and student_preds must have equal length")
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    pls = np.array([p.pseudo_label for p in batch])
    g = _as_labels(golds, "golds")
    preds = _as_labels(student_preds, "student_preds")
    m = np.asarray(mask, dtype=bool)
    teacher_hits = pls == g
    student_hits = preds == pls
    selected = int(m.sum())
    return ThresholdEvalRecord(
        teacher_acc_before=float(teacher_hits.mean()),
        teacher_acc_after=float(teacher_hits[m].mean()) if selected else None,
        student_acc_before=float(student_hits.mean()),
        student_acc_after=float(student_hits[m].mean()) if selected else None,
    )


@dataclass(frozen=True)
class StepRecord:
    """One training step: selection accounting, signal ranges, thresholds, loss."""

    step: int
    batch_size: int
    selected: int
    cum_selected: int
    cum_seen: int
    loss: float
    uncertainty_min: float
    uncertainty_max: float
    confidence_min: float
    confidence_max: float
    student_thresholds: tuple[float, ...]
    teacher_thresholds: tuple[float, ...]
    teacher_acc_before: float | None = None
    teacher_acc_after: float | None = None
    student_acc_before: float | None = None
    student_acc_after: float | None = None


@dataclass(frozen=True)
class EvalRecord:
    step: int
    accuracy: float
    macro_f1: float


@dataclass
class RunLedger:
    """Per-step and per-evaluation records accumulated over one training run."""

    steps: list[StepRecord] = field(default_factory=list)
    evals: list[EvalRecord] = field(default_factory=list)

    def add_step(self, record: StepRecord) -> None:
        if self.steps:
            prev = self.steps[-1]
            if record.cum_selected != prev.cum_selected + record.selected:
                raise ValueError("cumulative selected count is inconsistent")
            if record.cum_seen != prev.cum_seen + record.batch_size:
                raise ValueError("cumulative seen count is inconsistent")
        elif record.cum_selected != record.selected or record.cum_seen != record.batch_size:
            raise ValueError("first step record must start the cumulative counts")
        if record.cum_selected > record.cum_seen:
            raise ValueError("cannot select more samples than seen")
        self.steps.append(record)

    def add_eval(self, record: EvalRecord) -> None:
        self.evals.append(record)


@dataclass(frozen=True)
class EfficiencyReport:
    total_selected: int
    total_seen: int

    @property
    def fraction(self) -> float:
        return self.total_selected / self.total_seen if self.total_seen else 0.0


def efficiency_report(ledger: RunLedger) -> EfficiencyReport:
    """Exact integer accounting of selected vs seen samples over a full run."""
    total_selected = 0
    total_seen = 0
    for rec in ledger.steps:
        total_selected += rec.selected
        total_seen += rec.batch_size
    return EfficiencyReport(total_selected=total_selected, total_seen=total_seen)
