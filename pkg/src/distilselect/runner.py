"""Experiment orchestration: the training loop, seed grids, and sweeps.

For each seed the runner builds the data, pseudo-labels the training split,
and trains the zero-initialized student over shuffled batches. Every batch
goes through the selection pipeline (threshold-state updates, mask, weights)
before the SGD step; validation runs at a fixed cadence and the snapshot
with the best validation accuracy (macro-F1 breaking ties) is the one
evaluated exactly once on the test split.

The dataset is generated from its own seed and shared across run seeds; the
simulated teacher's seed is mixed with the run seed so pseudo-label noise
varies across seeds while staying identical across methods within a seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .baselines import (
    NO_SELECTION,
    STUDENT_GATE_ONLY,
    TEACHER_GATE_ONLY,
    BaselineSpec,
    baseline_mask,
)
from .config import (
    DUAL_GATE,
    DUAL_GATE_WEIGHTED,
    ExperimentConfig,
    ExternalTeacherConfig,
    FileDatasetConfig,
    MethodConfig,
    SelectorConfig,
)
from .core import DatasetSplit, PseudoLabeledSample
from .datagen import SampleSplits, SynthConfig, generate, load_dataset
from .metrics import (
    CalibrationBin,
    EfficiencyReport,
    EvalRecord,
    RunLedger,
    StepRecord,
    calibration_bins,
    efficiency_report,
    threshold_evaluation,
)
from .reports import (
    write_calibration,
    write_evals,
    write_ledger,
    write_summary,
    write_sweep,
    write_threshold_trace,
)
from .selector import (
    UPDATE_THEN_SELECT,
    ThresholdState,
    apply_batch,
    class_thresholds,
)
from .student import (
    StudentParams,
    batch_loss,
    entropy_rows,
    evaluate,
    forward_batch,
    train_step,
)
from .teacher import ingest_external, simulate_teacher

# Decorrelates pseudo-label noise across run seeds without touching the data.
_TEACHER_SEED_STRIDE = 100003

# Methods whose mask comes straight from the dual-gate selector, with fixed
# (force_student_trivial, force_teacher_trivial) flags. The remaining
# baselines still advance the threshold states (so ledgers stay uniform) but
# take their mask from `baseline_mask`.
_FIXED_GATE_FLAGS = {
    NO_SELECTION: (True, True),
    STUDENT_GATE_ONLY: (False, True),
    TEACHER_GATE_ONLY: (True, False),
}


@dataclass
class SeedRunResult:
    seed: int
    ledger: RunLedger
    threshold_trace: list[tuple]
    calibration: list[CalibrationBin] | None
    best_step: int
    best_val_acc: float
    best_val_f1: float
    test_acc: float
    test_f1: float
    efficiency: EfficiencyReport

    @property
    def selected_fraction(self) -> float:
        return self.efficiency.fraction


@dataclass
class ExperimentResult:
    method: str
    per_seed: list[SeedRunResult]
    mean_test_acc: float
    std_test_acc: float
    mean_test_f1: float
    std_test_f1: float
    output_dir: str | None


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std


def _build_splits(cfg: ExperimentConfig) -> tuple[SampleSplits, int]:
    if isinstance(cfg.dataset, SynthConfig):
        return generate(cfg.dataset), cfg.dataset.k
    if isinstance(cfg.dataset, FileDatasetConfig):
        splits, meta = load_dataset(cfg.dataset.path)
        return splits, meta["k"]
    raise TypeError(f"unsupported dataset config {type(cfg.dataset)!r}")


def _pseudo_label(
    cfg: ExperimentConfig, splits: SampleSplits, k: int, seed: int
) -> list[PseudoLabeledSample]:
    if isinstance(cfg.teacher, ExternalTeacherConfig):
        return ingest_external(cfg.teacher.path, splits.train)
    effective = replace(
        cfg.teacher, rng_seed=cfg.teacher.rng_seed + _TEACHER_SEED_STRIDE * seed
    )
    return simulate_teacher(splits.train, effective, k)


def _method_force_flags(method: MethodConfig) -> tuple[bool, bool]:
    """(force_student_trivial, force_teacher_trivial) for the selector pass."""
    if method.name in (DUAL_GATE, DUAL_GATE_WEIGHTED):
        return (method.force_student_trivial, method.force_teacher_trivial)
    if method.name in _FIXED_GATE_FLAGS:
        return _FIXED_GATE_FLAGS[method.name]
    # Pure baselines: the dual-gate mask is discarded, so force both gates
    # open to keep the state bookkeeping identical across methods.
    return (True, True)


def _baseline_spec(method: MethodConfig) -> BaselineSpec | None:
    if method.name in (DUAL_GATE, DUAL_GATE_WEIGHTED) or method.name in _FIXED_GATE_FLAGS:
        return None
    return BaselineSpec(
        kind=method.name,
        ratio=method.ratio,
        threshold=method.threshold,
        rng_seed=method.rng_seed,
    )


def _dump_diagnostic(
    out_dir: Path | None,
    method: str,
    seed: int,
    step: int,
    batch: Sequence[PseudoLabeledSample],
    mask: Sequence[int],
    weights: Sequence[float],
    uncertainties: Sequence[float],
    loss: float,
) -> str | None:
    if out_dir is None:
        return None
    payload = {
        "step": step,
        "loss": repr(loss),
        "sample_ids": [p.sample.id for p in batch],
        "pseudo_labels": [p.pseudo_label for p in batch],
        "confidences": [p.confidence for p in batch],
        "uncertainties": list(uncertainties),
        "mask": list(mask),
        "weights": list(weights),
    }
    path = out_dir / f"{method}_seed{seed}_diagnostic.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return str(path)


def _run_single(
    cfg: ExperimentConfig,
    seed: int,
    splits: SampleSplits,
    k: int,
    out_dir: Path | None,
) -> SeedRunResult:
    method = cfg.method
    sel_cfg = cfg.selector
    train = _pseudo_label(cfg, splits, k, seed)
    data = DatasetSplit(train=tuple(train), val=splits.val, test=splits.test)
    dim = splits.dim
    golds_available = all(p.sample.gold_label is not None for p in data.train)

    params = StudentParams.zeros(k, dim, cfg.student.learning_rate)
    s_state = ThresholdState.initial(
        k, sel_cfg.lambda_student, sel_cfg.beta_student_local, sel_cfg.beta_student_global
    )
    t_state = ThresholdState.initial(
        k, sel_cfg.lambda_teacher, sel_cfg.beta_teacher_local, sel_cfg.beta_teacher_global
    )
    force_student, force_teacher = _method_force_flags(method)
    weighted = method.name == DUAL_GATE_WEIGHTED
    spec = _baseline_spec(method)
    update_then_select = sel_cfg.update_order == UPDATE_THEN_SELECT

    shuffle_rng = np.random.default_rng([seed, 1])
    baseline_rng = np.random.default_rng([method.rng_seed, seed, 2])

    ledger = RunLedger()
    trace: list[tuple] = []
    n = len(data.train)
    batch_size = cfg.student.batch_size
    step = 0
    cum_selected = 0
    cum_seen = 0
    best: tuple[float, float, int, StudentParams] | None = None
    last_eval_step = -1

    def run_eval(at_step: int, current: StudentParams) -> None:
        nonlocal best, last_eval_step
        acc, f1 = evaluate(current, data.val)
        ledger.add_eval(EvalRecord(step=at_step, accuracy=acc, macro_f1=f1))
        if best is None or (acc, f1) > (best[0], best[1]):
            best = (acc, f1, at_step, current)
        last_eval_step = at_step

    for _epoch in range(cfg.student.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = [data.train[int(i)] for i in order[start : start + batch_size]]
            step += 1

            feats = np.stack([p.sample.features for p in batch])
            probs = forward_batch(params, feats)
            uncertainties = [float(u) for u in entropy_rows(probs)]
            student_preds = np.argmax(probs, axis=1)
            confidences = [p.confidence for p in batch]
            pseudo_labels = [p.pseudo_label for p in batch]

            selection, new_s, new_t = apply_batch(
                uncertainties,
                confidences,
                pseudo_labels,
                s_state,
                t_state,
                weighted=weighted,
                force_student_trivial=force_student,
                force_teacher_trivial=force_teacher,
                update_order=sel_cfg.update_order,
                weight_over_selected=sel_cfg.weight_over_selected,
            )
            if spec is not None:
                mask_states = (new_s, new_t) if update_then_select else (s_state, t_state)
                selection = replace(
                    selection,
                    mask=baseline_mask(
                        spec,
                        batch,
                        uncertainties,
                        student_state=mask_states[0],
                        teacher_state=mask_states[1],
                        rng=baseline_rng,
                    ),
                )
            thr_s_state, thr_t_state = (
                (new_s, new_t) if update_then_select else (s_state, t_state)
            )
            s_thresholds = class_thresholds(thr_s_state)
            t_thresholds = class_thresholds(thr_t_state)

            loss = batch_loss(params, batch, selection.mask, selection.weights)
            if not math.isfinite(loss):
                dump = _dump_diagnostic(
                    out_dir, method.name, seed, step, batch,
                    selection.mask, selection.weights, uncertainties, loss,
                )
                where = f" (diagnostic dump: {dump})" if dump else ""
                raise RuntimeError(
                    f"non-finite loss {loss!r} at step {step} (seed {seed}){where}"
                )

            cum_selected += selection.selected
            cum_seen += len(batch)
            # Each threshold is judged on its own selection: pseudo-label
            # quality over the samples passing the teacher gate, student
            # agreement over the samples passing the student gate.
            teacher_eval = student_eval = None
            if golds_available:
                golds = [p.sample.gold_label for p in batch]
                teacher_gate = [
                    1 if confidences[i] >= selection.teacher_thresholds_used[i] else 0
                    for i in range(len(batch))
                ]
                student_gate = [
                    1 if uncertainties[i] >= selection.student_thresholds_used[i] else 0
                    for i in range(len(batch))
                ]
                teacher_eval = threshold_evaluation(batch, teacher_gate, golds, student_preds)
                student_eval = threshold_evaluation(batch, student_gate, golds, student_preds)
            ledger.add_step(
                StepRecord(
                    step=step,
                    batch_size=len(batch),
                    selected=selection.selected,
                    cum_selected=cum_selected,
                    cum_seen=cum_seen,
                    loss=loss,
                    uncertainty_min=min(uncertainties),
                    uncertainty_max=max(uncertainties),
                    confidence_min=min(confidences),
                    confidence_max=max(confidences),
                    student_thresholds=s_thresholds,
                    teacher_thresholds=t_thresholds,
                    teacher_acc_before=teacher_eval.teacher_acc_before if teacher_eval else None,
                    teacher_acc_after=teacher_eval.teacher_acc_after if teacher_eval else None,
                    student_acc_before=student_eval.student_acc_before if student_eval else None,
                    student_acc_after=student_eval.student_acc_after if student_eval else None,
                )
            )
            for y in range(k):
                trace.append(
                    (
                        step,
                        y,
                        thr_s_state.tau_global,
                        thr_s_state.p_hat_local[y],
                        s_thresholds[y],
                        thr_t_state.tau_global,
                        thr_t_state.p_hat_local[y],
                        t_thresholds[y],
                    )
                )

            params = train_step(params, batch, selection.mask, selection.weights)
            s_state, t_state = new_s, new_t

            if step % cfg.eval_every == 0:
                run_eval(step, params)

    if last_eval_step != step:
        run_eval(step, params)
    assert best is not None
    best_acc, best_f1, best_step, best_params = best
    test_acc, test_f1 = evaluate(best_params, data.test)

    calibration = None
    if golds_available:
        calibration = calibration_bins(
            [p.confidence for p in data.train],
            [1 if p.pseudo_label == p.sample.gold_label else 0 for p in data.train],
            cfg.calibration_bins,
            (1.0 / k, 1.0),
        )

    return SeedRunResult(
        seed=seed,
        ledger=ledger,
        threshold_trace=trace,
        calibration=calibration,
        best_step=best_step,
        best_val_acc=best_acc,
        best_val_f1=best_f1,
        test_acc=test_acc,
        test_f1=test_f1,
        efficiency=efficiency_report(ledger),
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the configured method over every seed; write reports if an output dir is set."""
    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    splits, k = _build_splits(cfg)
    per_seed = [_run_single(cfg, seed, splits, k, out_dir) for seed in cfg.seeds]

    mean_acc, std_acc = _mean_std([r.test_acc for r in per_seed])
    mean_f1, std_f1 = _mean_std([r.test_f1 for r in per_seed])
    result = ExperimentResult(
        method=cfg.method.name,
        per_seed=per_seed,
        mean_test_acc=mean_acc,
        std_test_acc=std_acc,
        mean_test_f1=mean_f1,
        std_test_f1=std_f1,
        output_dir=str(out_dir) if out_dir else None,
    )
    if out_dir is not None:
        _write_reports(cfg, result, out_dir, k)
    return result


def _summary_rows(result: ExperimentResult) -> list[tuple]:
    rows = []
    for r in result.per_seed:
        rows.append(
            (
                result.method,
                r.seed,
                r.test_acc,
                r.test_f1,
                r.best_val_acc,
                r.best_val_f1,
                r.efficiency.total_selected,
                r.efficiency.total_seen,
                r.selected_fraction,
            )
        )
    accs = [r.test_acc for r in result.per_seed]
    f1s = [r.test_f1 for r in result.per_seed]
    vals = [r.best_val_acc for r in result.per_seed]
    val_f1s = [r.best_val_f1 for r in result.per_seed]
    sels = [float(r.efficiency.total_selected) for r in result.per_seed]
    seens = [float(r.efficiency.total_seen) for r in result.per_seed]
    fracs = [r.selected_fraction for r in result.per_seed]
    for tag, reduce in (("mean", lambda v: _mean_std(v)[0]), ("std", lambda v: _mean_std(v)[1])):
        rows.append(
            (
                result.method,
                tag,
                reduce(accs),
                reduce(f1s),
                reduce(vals),
                reduce(val_f1s),
                reduce(sels),
                reduce(seens),
                reduce(fracs),
            )
        )
    return rows


def _write_reports(
    cfg: ExperimentConfig, result: ExperimentResult, out_dir: Path, k: int
) -> None:
    method = result.method
    for r in result.per_seed:
        prefix = out_dir / f"{method}_seed{r.seed}"
        write_ledger(f"{prefix}_ledger.tsv", r.ledger, k)
        write_evals(f"{prefix}_evals.tsv", r.ledger)
        write_threshold_trace(f"{prefix}_thresholds.tsv", r.threshold_trace)
        if r.calibration is not None:
            write_calibration(f"{prefix}_calibration.tsv", r.calibration)
    write_summary(out_dir / f"{method}_summary.tsv", _summary_rows(result))


_SWEEPABLE_SELECTOR = (
    "lambda_student",
    "lambda_teacher",
    "beta_student_local",
    "beta_student_global",
    "beta_teacher_local",
    "beta_teacher_global",
)
SWEEPABLE_PARAMS = _SWEEPABLE_SELECTOR + ("learning_rate",)


@dataclass(frozen=True)
class SweepRow:
    params: tuple
    mean_val_acc: float
    mean_test_acc: float
    best: bool


@dataclass
class SweepResult:
    param_names: tuple[str, ...]
    rows: list[SweepRow]

    @property
    def best_row(self) -> SweepRow:
        return next(r for r in self.rows if r.best)


def sweep(cfg: ExperimentConfig, grid: dict[str, Sequence[Any]]) -> SweepResult:
    """Run the Cartesian product of the grid; flag the best row by validation accuracy.

    Grid keys must be selector hyper-parameters or `learning_rate`. Each grid
    point runs all configured seeds; per-run report files are skipped and the
    combined sweep table is written instead when an output dir is configured.
    """
    if not grid:
        raise ValueError("sweep grid must be nonempty")
    unknown = set(grid) - set(SWEEPABLE_PARAMS)
    if unknown:
        raise ValueError(f"unknown sweep parameter(s) {sorted(unknown)}")
    names = tuple(grid.keys())
    for name in names:
        if len(grid[name]) == 0:
            raise ValueError(f"sweep grid for {name!r} is empty")

    import itertools

    rows: list[tuple[tuple, float, float]] = []
    for combo in itertools.product(*(grid[name] for name in names)):
        overrides = dict(zip(names, combo))
        selector_kwargs = {
            f: overrides.get(f, getattr(cfg.selector, f)) for f in _SWEEPABLE_SELECTOR
        }
        selector_cfg = SelectorConfig(
            **selector_kwargs,
            weight_over_selected=cfg.selector.weight_over_selected,
            update_order=cfg.selector.update_order,
        )
        student_cfg = replace(
            cfg.student,
            learning_rate=overrides.get("learning_rate", cfg.student.learning_rate),
        )
        point_cfg = replace(
            cfg, selector=selector_cfg, student=student_cfg, output_dir=None
        )
        res = run_experiment(point_cfg)
        mean_val, _ = _mean_std([r.best_val_acc for r in res.per_seed])
        rows.append((combo, mean_val, res.mean_test_acc))

    best_idx = max(range(len(rows)), key=lambda i: (rows[i][1], -i))
    result = SweepResult(
        param_names=names,
        rows=[
            SweepRow(params=combo, mean_val_acc=val, mean_test_acc=test, best=i == best_idx)
            for i, (combo, val, test) in enumerate(rows)
        ],
    )
    if cfg.output_dir:
        out_dir = Path(cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_sweep(
            out_dir / "sweep.tsv",
            names,
            [tuple(r.params) + (r.mean_val_acc, r.mean_test_acc, r.best) for r in result.rows],
        )
    return result
