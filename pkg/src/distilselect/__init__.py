"""Adaptive dual-gate data selection for pseudo-label distillation."""

from .baselines import BaselineSpec, baseline_mask
from .config import (
    DUAL_GATE,
    DUAL_GATE_WEIGHTED,
    ExperimentConfig,
    MethodConfig,
    SelectorConfig,
    StudentConfig,
    load_config,
    parse_config,
)
from .core import (
    DatasetSplit,
    LabelSet,
    ProbDist,
    PseudoLabeledSample,
    Sample,
    argmax_label,
    confidence,
    entropy,
)
from .datagen import SampleSplits, SynthConfig, generate, load_dataset, save_dataset
from .metrics import (
    RunLedger,
    calibration_bins,
    efficiency_report,
    macro_f1,
    threshold_evaluation,
)
from .runner import ExperimentResult, run_experiment, sweep
from .selector import (
    SelectionResult,
    ThresholdState,
    apply_batch,
    compute_weights,
    final_threshold,
    run_batch,
    select,
    update_global,
    update_local,
)
from .student import StudentParams, batch_loss, evaluate, forward, train_step, uncertainty
from .teacher import SimulatedTeacherConfig, ingest_external, simulate_teacher

__version__ = "0.1.0"

__all__ = [
    "BaselineSpec",
    "DatasetSplit",
    "DUAL_GATE",
    "DUAL_GATE_WEIGHTED",
    "ExperimentConfig",
    "ExperimentResult",
    "LabelSet",
    "MethodConfig",
    "ProbDist",
    "PseudoLabeledSample",
    "RunLedger",
    "Sample",
    "SampleSplits",
    "SelectionResult",
    "SelectorConfig",
    "SimulatedTeacherConfig",
    "StudentConfig",
    "StudentParams",
    "SynthConfig",
    "ThresholdState",
    "apply_batch",
    "argmax_label",
    "baseline_mask",
    "batch_loss",
    "calibration_bins",
    "compute_weights",
    "confidence",
    "efficiency_report",
    "entropy",
    "evaluate",
    "final_threshold",
    "forward",
    "generate",
    "ingest_external",
    "load_config",
    "load_dataset",
    "macro_f1",
    "parse_config",
    "run_batch",
    "run_experiment",
    "save_dataset",
    "select",
    "simulate_teacher",
    "sweep",
    "threshold_evaluation",
    "train_step",
    "uncertainty",
    "update_global",
    "update_local",
]
