"""Delimited-text report writers with stable column order.

All files are tab-separated with a single header row. Floats are written
with repr (shortest round-trip form) and missing values as "NA", so repeated
runs of the same configuration produce byte-identical files. Writes go
through a temp file and an atomic rename.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Sequence

from .metrics import CalibrationBin, RunLedger

NA = "NA"


def _fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def ledger_header(k: int) -> list[str]:
    header = [
        "step",
        "batch_size",
        "selected",
        "cum_selected",
        "cum_seen",
        "loss",
        "u_min",
        "u_max",
        "c_min",
        "c_max",
        "teacher_acc_before",
        "teacher_acc_after",
        "student_acc_before",
        "student_acc_after",
    ]
    header.extend(f"s_thr_{y}" for y in range(k))
    header.extend(f"t_thr_{y}" for y in range(k))
    return header


def write_ledger(path: str | Path, ledger: RunLedger, k: int) -> None:
    rows = []
    for r in ledger.steps:
        row = [
            r.step,
            r.batch_size,
            r.selected,
            r.cum_selected,
            r.cum_seen,
            r.loss,
            r.uncertainty_min,
            r.uncertainty_max,
            r.confidence_min,
            r.confidence_max,
            r.teacher_acc_before,
            r.teacher_acc_after,
            r.student_acc_before,
            r.student_acc_after,
        ]
        row.extend(r.student_thresholds)
        row.extend(r.teacher_thresholds)
        rows.append(row)
    _write_table(path, ledger_header(k), rows)


def write_evals(path: str | Path, ledger: RunLedger) -> None:
    _write_table(
        path,
        ["step", "val_acc", "val_macro_f1"],
        [(r.step, r.accuracy, r.macro_f1) for r in ledger.evals],
    )


THRESHOLD_TRACE_HEADER = [
    "step",
    "label",
    "s_tau_global",
    "s_p_hat",
    "s_threshold",
    "t_tau_global",
    "t_p_hat",
    "t_threshold",
]


def write_threshold_trace(path: str | Path, rows: Iterable[Sequence]) -> None:
    _write_table(path, THRESHOLD_TRACE_HEADER, rows)


def write_calibration(path: str | Path, bins: Sequence[CalibrationBin]) -> None:
    _write_table(
        path,
        ["bin_lo", "bin_hi", "count", "accuracy"],
        [(b.lo, b.hi, b.count, b.accuracy) for b in bins],
    )


SUMMARY_HEADER = [
    "method",
    "seed",
    "test_acc",
    "test_macro_f1",
    "best_val_acc",
    "best_val_macro_f1",
    "selected",
    "seen",
    "selected_pct",
]


def write_summary(path: str | Path, rows: Iterable[Sequence]) -> None:
    _write_table(path, SUMMARY_HEADER, rows)


def write_sweep(path: str | Path, param_names: Sequence[str], rows: Iterable[Sequence]) -> None:
    _write_table(path, list(param_names) + ["mean_val_acc", "mean_test_acc", "best"], rows)
