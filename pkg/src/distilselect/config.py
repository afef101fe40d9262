"""Experiment configuration: typed sections plus strict JSON parsing.

Unknown keys are rejected at every level so a typo in a hyper-parameter name
fails loudly instead of silently running with a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .baselines import BASELINE_KINDS, FIXED_CONF_THRESHOLD, RATIO_KINDS
from .datagen import SynthConfig
from .selector import SELECT_THEN_UPDATE, UPDATE_THEN_SELECT
from .teacher import SimulatedTeacherConfig

DUAL_GATE = "dual_gate"
DUAL_GATE_WEIGHTED = "dual_gate_weighted"
METHOD_NAMES = (DUAL_GATE, DUAL_GATE_WEIGHTED) + BASELINE_KINDS


@dataclass(frozen=True)
class FileDatasetConfig:
    path: str


@dataclass(frozen=True)
class ExternalTeacherConfig:
    path: str


@dataclass(frozen=True)
class MethodConfig:
    """Which selection rule drives training, plus its rule-specific knobs.

    The force flags apply to the dual-gate methods and disable one indicator
    each; forcing both reduces the dual gate to no selection at all.
    """

    name: str
    ratio: float | None = None
    threshold: float | None = None
    force_student_trivial: bool = False
    force_teacher_trivial: bool = False
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}; expected one of {METHOD_NAMES}")
        if self.name in RATIO_KINDS and self.ratio is None:
            raise ValueError(f"method {self.name!r} requires a ratio")
        if self.ratio is not None and not 0.0 < self.ratio <= 1.0:
            raise ValueError("ratio must lie in (0, 1]")
        if self.name == FIXED_CONF_THRESHOLD and self.threshold is None:
            raise ValueError("fixed_conf_threshold requires a threshold")
        if (self.force_student_trivial or self.force_teacher_trivial) and self.name not in (
            DUAL_GATE,
            DUAL_GATE_WEIGHTED,
        ):
            raise ValueError("force flags apply only to the dual-gate methods")


@dataclass(frozen=True)
class StudentConfig:
    learning_rate: float = 0.1
    epochs: int = 6
    batch_size: int = 32

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(frozen=True)
class SelectorConfig:
    lambda_student: float = 0.9
    lambda_teacher: float = 0.9
    beta_student_local: float = 1.0
    beta_student_global: float = 1.0
    beta_teacher_local: float = 1.0
    beta_teacher_global: float = 1.0
    weight_over_selected: bool = False
    update_order: str = UPDATE_THEN_SELECT

    def __post_init__(self) -> None:
        for name in ("lambda_student", "lambda_teacher"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        for name in (
            "beta_student_local",
            "beta_student_global",
            "beta_teacher_local",
            "beta_teacher_global",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.update_order not in (UPDATE_THEN_SELECT, SELECT_THEN_UPDATE):
            raise ValueError(f"unknown update_order {self.update_order!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: SynthConfig | FileDatasetConfig
    teacher: SimulatedTeacherConfig | ExternalTeacherConfig
    method: MethodConfig
    student: StudentConfig = StudentConfig()
    selector: SelectorConfig = SelectorConfig()
    seeds: tuple[int, ...] = (0,)
    eval_every: int = 100
    calibration_bins: int = 10
    output_dir: str | None = None

    def __post_init__(self) -> None:
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValueError("seeds must be nonempty")
        if any(s < 0 for s in seeds):
            raise ValueError("seeds must be nonnegative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")
        if self.calibration_bins < 2:
            raise ValueError("calibration_bins must be at least 2")
        object.__setattr__(self, "seeds", seeds)


def _build(cls, obj: dict[str, Any], section: str):
    if not isinstance(obj, dict):
        raise ValueError(f"config section {section!r} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"unknown config key(s) {sorted(unknown)} in section {section!r}")
    kwargs = dict(obj)
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
    return cls(**kwargs)


def _parse_dataset(obj: dict[str, Any]) -> SynthConfig | FileDatasetConfig:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("dataset section must declare a 'kind'")
    body = {k: v for k, v in obj.items() if k != "kind"}
    if obj["kind"] == "synthetic":
        return _build(SynthConfig, body, "dataset")
    if obj["kind"] == "file":
        return _build(FileDatasetConfig, body, "dataset")
    raise ValueError(f"unknown dataset kind {obj['kind']!r}")


def _parse_teacher(obj: dict[str, Any]) -> SimulatedTeacherConfig | ExternalTeacherConfig:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("teacher section must declare a 'kind'")
    body = {k: v for k, v in obj.items() if k != "kind"}
    if obj["kind"] == "simulated":
        return _build(SimulatedTeacherConfig, body, "teacher")
    if obj["kind"] == "external":
        return _build(ExternalTeacherConfig, body, "teacher")
    raise ValueError(f"unknown teacher kind {obj['kind']!r}")


_TOP_LEVEL_KEYS = {
    "dataset",
    "teacher",
    "method",
    "student",
    "selector",
    "seeds",
    "eval_every",
    "calibration_bins",
    "output_dir",
}
_REQUIRED_KEYS = {"dataset", "teacher", "method"}


def parse_config(obj: dict[str, Any]) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON object, rejecting unknown keys."""
    if not isinstance(obj, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(obj) - _TOP_LEVEL_KEYS
    if unknown:
        raise ValueError(f"unknown top-level config key(s) {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(obj)
    if missing:
        raise ValueError(f"missing required config section(s) {sorted(missing)}")
    method = obj["method"]
    if isinstance(method, str):
        method = {"name": method}
    kwargs: dict[str, Any] = {
        "dataset": _parse_dataset(obj["dataset"]),
        "teacher": _parse_teacher(obj["teacher"]),
        "method": _build(MethodConfig, method, "method"),
    }
    if "student" in obj:
        kwargs["student"] = _build(StudentConfig, obj["student"], "student")
    if "selector" in obj:
        kwargs["selector"] = _build(SelectorConfig, obj["selector"], "selector")
    for key in ("seeds", "eval_every", "calibration_bins", "output_dir"):
        if key in obj:
            kwargs[key] = tuple(obj[key]) if key == "seeds" else obj[key]
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(obj)
