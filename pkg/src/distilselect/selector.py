"""Adaptive dual-gate sample selection.

One exponential-moving-average threshold tracker is kept per signal side:
student uncertainty and teacher confidence. Each tracker holds a global EMA
of per-batch signal means plus a per-class EMA of class-conditional means;
the per-class vector is max-normalized and combined with the global value
(each raised to its own exponent) to give one threshold per class. A sample
is kept only when its student uncertainty and its teacher confidence both
reach the thresholds of its pseudo-label's class.

Both trackers start at zero, so thresholds are (near) zero early on and
selection opens wide before tightening as the EMAs warm up.

All batch statistics here are accumulated with plain Python floats in
sample-index order. That fixes the floating-point operation order, which
keeps runs reproducible bit-for-bit and lets tests replay them against an
independent scalar reference.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import PseudoLabeledSample
from .student import StudentParams, uncertainty_batch

UPDATE_THEN_SELECT = "update_then_select"
SELECT_THEN_UPDATE = "select_then_update"
_UPDATE_ORDERS = (UPDATE_THEN_SELECT, SELECT_THEN_UPDATE)


@dataclass(frozen=True)
class ThresholdState:
    """EMA threshold tracker for one signal side.

    `tau_global` tracks batch means across steps, `p_hat_local[y]` tracks the
    class-conditional mean for pseudo-label y. `beta_local` exponentiates the
    max-normalized local part and `beta_global` the global part when the two
    are combined into a final per-class threshold.
    """

    tau_global: float
    p_hat_local: tuple[float, ...]
    momentum: float
    beta_local: float
    beta_global: float
    step: int

    def __post_init__(self) -> None:
        if not 0.0 < self.momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if self.beta_local < 0 or self.beta_global < 0:
            raise ValueError("exponents must be nonnegative")
        if self.step < 0:
            raise ValueError("step must be nonnegative")
        if len(self.p_hat_local) < 2:
            raise ValueError("need at least 2 classes")
        # The step counter advances in update_global, so a state whose local
        # update ran first within a batch may legally hold local values at
        # step 0; the global value cannot.
        if self.step == 0 and self.tau_global != 0.0:
            raise ValueError("a step-0 state must have tau_global = 0")
        object.__setattr__(self, "tau_global", float(self.tau_global))
        object.__setattr__(self, "p_hat_local", tuple(float(v) for v in self.p_hat_local))

    @property
    def num_classes(self) -> int:
        return len(self.p_hat_local)

    @classmethod
    def initial(
        cls, num_classes: int, momentum: float, beta_local: float, beta_global: float
    ) -> "ThresholdState":
        return cls(
            tau_global=0.0,
            p_hat_local=(0.0,) * num_classes,
            momentum=momentum,
            beta_local=beta_local,
            beta_global=beta_global,
            step=0,
        )


def _mean_in_order(values: Sequence[float]) -> float:
    total = 0.0
    for v in values:
        total += float(v)
    return total / len(values)


def update_global(state: ThresholdState, signals: Sequence[float]) -> ThresholdState:
    """EMA update of the global threshold with this batch's mean signal.

    Also advances the step counter; ``update_local`` does not, so applying
    the pair advances the state by exactly one step per batch.
    """
    if len(signals) == 0:
        raise ValueError("signals must be nonempty")
    mean = _mean_in_order(signals)
    tau = state.momentum * state.tau_global + (1.0 - state.momentum) * mean
    return replace(state, tau_global=tau, step=state.step + 1)


def update_local(
    state: ThresholdState,
    signals: Sequence[float],
    pseudo_labels: Sequence[int],
) -> ThresholdState:
    """EMA update of the per-class signal means.

    Classes absent from the batch keep their previous value unchanged rather
    than decaying toward zero.
    """
    if len(signals) == 0:
        raise ValueError("signals must be nonempty")
    if len(signals) != len(pseudo_labels):
        raise ValueError("signals and pseudo_labels must have equal length")
    k = state.num_classes
    sums = [0.0] * k
    counts = [0] * k
    for value, label in zip(signals, pseudo_labels):
        y = int(label)
        if not 0 <= y < k:
            raise ValueError(f"pseudo-label {y} outside [0, {k})")
        sums[y] += float(value)
        counts[y] += 1
    p_hat = list(state.p_hat_local)
    for y in range(k):
        if counts[y] > 0:
            class_mean = sums[y] / counts[y]
            p_hat[y] = state.momentum * p_hat[y] + (1.0 - state.momentum) * class_mean
    return replace(state, p_hat_local=tuple(p_hat))


def final_threshold(state: ThresholdState, y: int) -> float:
    """Per-class threshold: MaxNorm(p_hat[y])^beta_local * tau_global^beta_global.

    Edge rules: an all-zero local vector makes the MaxNorm factor 0, and 0^0
    is 1 so that a zero exponent disables a factor even at value zero.
    """
    if not 0 <= y < state.num_classes:
        raise ValueError(f"label {y} outside [0, {state.num_classes})")
    mx = max(state.p_hat_local)
    ratio = state.p_hat_local[y] / mx if mx > 0.0 else 0.0
    return (ratio ** state.beta_local) * (state.tau_global ** state.beta_global)


def class_thresholds(state: ThresholdState) -> tuple[float, ...]:
    return tuple(final_threshold(state, y) for y in range(state.num_classes))


@dataclass(frozen=True)
class SelectionResult:
    """Mask and weights for one batch, plus the per-sample thresholds applied."""

    mask: tuple[int, ...]
    weights: tuple[float, ...]
    student_thresholds_used: tuple[float, ...]
    teacher_thresholds_used: tuple[float, ...]

    @property
    def selected(self) -> int:
        return sum(self.mask)


def _select_raw(
    uncertainties: Sequence[float],
    confidences: Sequence[float],
    pseudo_labels: Sequence[int],
    student_state: ThresholdState,
    teacher_state: ThresholdState,
    force_student_trivial: bool,
    force_teacher_trivial: bool,
) -> SelectionResult:
    if not (len(uncertainties) == len(confidences) == len(pseudo_labels)):
        raise ValueError("uncertainties, confidences, and pseudo_labels must have equal length")
    if len(uncertainties) == 0:
        raise ValueError("batch must be nonempty")
    mask = []
    s_used = []
    t_used = []
    for u, c, label in zip(uncertainties, confidences, pseudo_labels):
        s_thr = final_threshold(student_state, int(label))
        t_thr = final_threshold(teacher_state, int(label))
        student_ok = force_student_trivial or float(u) >= s_thr
        teacher_ok = force_teacher_trivial or float(c) >= t_thr
        mask.append(1 if (student_ok and teacher_ok) else 0)
        s_used.append(s_thr)
        t_used.append(t_thr)
    return SelectionResult(
        mask=tuple(mask),
        weights=(1.0,) * len(mask),
        student_thresholds_used=tuple(s_used),
        teacher_thresholds_used=tuple(t_used),
    )


def select(
    batch: Sequence[PseudoLabeledSample],
    uncertainties: Sequence[float],
    student_state: ThresholdState,
    teacher_state: ThresholdState,
    *,
    force_student_trivial: bool = False,
    force_teacher_trivial: bool = False,
) -> SelectionResult:
    """Dual-gate mask: keep sample i iff U_i >= student threshold AND C_i >= teacher threshold.

    Both comparisons use >= against the thresholds of the sample's
    pseudo-label class, read from states already updated with this batch.
    The force flags disable one gate each (its indicator is taken as 1),
    which yields the single-gate ablations.
    """
    if len(batch) != len(uncertainties):
        raise ValueError("batch and uncertainties must have equal length")
    return _select_raw(
        [float(u) for u in uncertainties],
        [p.confidence for p in batch],
        [p.pseudo_label for p in batch],
        student_state,
        teacher_state,
        force_student_trivial,
        force_teacher_trivial,
    )


def _normalized_weights(
    confidences: Sequence[float],
    uncertainties: Sequence[float],
    mask: Sequence[int],
    over_selected: bool,
) -> tuple[float, ...]:
    n = len(confidences)
    if over_selected:
        idx = [i for i in range(n) if mask[i]]
    else:
        idx = list(range(n))

    def sum_normalize(values: Sequence[float]) -> list[float]:
        total = 0.0
        for i in idx:
            total += float(values[i])
        if total == 0.0:
            return [1.0 / n] * n
        return [float(v) / total for v in values]

    f_conf = sum_normalize(confidences)
    f_unc = sum_normalize(uncertainties)
    return tuple(f_conf[i] + f_unc[i] for i in range(n))


def compute_weights(
    batch: Sequence[PseudoLabeledSample],
    uncertainties: Sequence[float],
    mask: Sequence[int],
    *,
    over_selected: bool = False,
) -> tuple[float, ...]:
    """Per-sample weights: sum-normalized confidence plus sum-normalized uncertainty.

    Normalization runs over the full batch by default (so the weights sum to
    2); `over_selected=True` normalizes over the selected subset instead. A
    signal summing to zero degrades to a uniform 1/B term. Weights are
    returned for every sample; the loss applies them only where the mask is 1.
    """
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    if not (len(batch) == len(uncertainties) == len(mask)):
        raise ValueError("batch, uncertainties, and mask must have equal length")
    return _normalized_weights(
        [p.confidence for p in batch],
        [float(u) for u in uncertainties],
        [int(m) for m in mask],
        over_selected,
    )


def apply_batch(
    uncertainties: Sequence[float],
    confidences: Sequence[float],
    pseudo_labels: Sequence[int],
    student_state: ThresholdState,
    teacher_state: ThresholdState,
    *,
    weighted: bool = False,
    force_student_trivial: bool = False,
    force_teacher_trivial: bool = False,
    update_order: str = UPDATE_THEN_SELECT,
    weight_over_selected: bool = False,
) -> tuple[SelectionResult, ThresholdState, ThresholdState]:
    """Advance both trackers on this batch and build its selection result.

    The default order updates the EMAs with the whole batch first and then
    selects against the fresh thresholds; `select_then_update` flips that as
    a one-flag experiment. State updates always see every sample in the
    batch, selected or not.
    """
    u = [float(v) for v in uncertainties]
    c = [float(v) for v in confidences]
    labels = [int(y) for y in pseudo_labels]
    if update_order not in _UPDATE_ORDERS:
        raise ValueError(f"unknown update_order {update_order!r}")

    def advance(state: ThresholdState, signals: list[float]) -> ThresholdState:
        return update_local(update_global(state, signals), signals, labels)

    if update_order == UPDATE_THEN_SELECT:
        student_state = advance(student_state, u)
        teacher_state = advance(teacher_state, c)
        result = _select_raw(
            u, c, labels, student_state, teacher_state,
            force_student_trivial, force_teacher_trivial,
        )
    else:
        result = _select_raw(
            u, c, labels, student_state, teacher_state,
            force_student_trivial, force_teacher_trivial,
        )
        student_state = advance(student_state, u)
        teacher_state = advance(teacher_state, c)

    if weighted:
        result = replace(
            result,
            weights=_normalized_weights(c, u, result.mask, weight_over_selected),
        )
    return result, student_state, teacher_state


@dataclass(frozen=True)
class BatchOutcome:
    selection: SelectionResult
    student_state: ThresholdState
    teacher_state: ThresholdState
    uncertainties: tuple[float, ...]


def run_batch(
    batch: Sequence[PseudoLabeledSample],
    params: StudentParams,
    student_state: ThresholdState,
    teacher_state: ThresholdState,
    *,
    weighted: bool = False,
    force_student_trivial: bool = False,
    force_teacher_trivial: bool = False,
    update_order: str = UPDATE_THEN_SELECT,
    weight_over_selected: bool = False,
) -> BatchOutcome:
    """Full selection pass for one batch: uncertainties, state updates, mask, weights.

    Uncertainties come from the current (pre-update) student parameters; the
    caller feeds the returned mask and weights to the training step.
    """
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    feats = np.stack([p.sample.features for p in batch])
    u = tuple(float(v) for v in uncertainty_batch(params, feats))
    result, new_student, new_teacher = apply_batch(
        u,
        [p.confidence for p in batch],
        [p.pseudo_label for p in batch],
        student_state,
        teacher_state,
        weighted=weighted,
        force_student_trivial=force_student_trivial,
        force_teacher_trivial=force_teacher_trivial,
        update_order=update_order,
        weight_over_selected=weight_over_selected,
    )
    return BatchOutcome(
        selection=result,
        student_state=new_student,
        teacher_state=new_teacher,
        uncertainties=u,
    )
