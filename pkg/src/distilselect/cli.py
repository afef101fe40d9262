"""Command-line entry point.

Subcommands: `run` trains one method over its seeds, `sweep` runs a
hyper-parameter grid, `gen-data` dumps a synthetic dataset to a file, and
`report` summarizes a finished run directory. Exits 0 on success and 1 with
a one-line diagnostic otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import MethodConfig, load_config
from .datagen import SynthConfig, generate, save_dataset
from .runner import run_experiment, sweep


def _apply_overrides(cfg, args):
    if getattr(args, "output_dir", None):
        cfg = replace(cfg, output_dir=args.output_dir)
    if getattr(args, "seeds", None):
        seeds = tuple(int(s) for s in args.seeds.split(","))
        cfg = replace(cfg, seeds=seeds)
    if getattr(args, "method", None):
        cfg = replace(cfg, method=MethodConfig(name=args.method))
    return cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = run_experiment(cfg)
    for r in result.per_seed:
        print(
            f"{result.method} seed={r.seed} test_acc={r.test_acc:.4f} "
            f"test_macro_f1={r.test_f1:.4f} selected={r.efficiency.total_selected}/"
            f"{r.efficiency.total_seen} ({100 * r.selected_fraction:.1f}%)"
        )
    print(
        f"{result.method} mean test_acc={result.mean_test_acc:.4f} "
        f"± {result.std_test_acc:.4f} over {len(result.per_seed)} seed(s)"
    )
    if result.output_dir:
        print(f"reports written to {result.output_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    if not isinstance(grid, dict):
        raise ValueError("grid file must be a JSON object mapping parameter -> values")
    result = sweep(cfg, grid)
    header = list(result.param_names) + ["mean_val_acc", "mean_test_acc"]
    print("\t".join(header))
    for row in result.rows:
        marker = "  <- best" if row.best else ""
        values = "\t".join(str(v) for v in row.params)
        print(f"{values}\t{row.mean_val_acc:.4f}\t{row.mean_test_acc:.4f}{marker}")
    return 0


def _cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    if not isinstance(cfg.dataset, SynthConfig):
        raise ValueError("gen-data requires a synthetic dataset section")
    splits = generate(cfg.dataset)
    save_dataset(args.out, splits, cfg.dataset)
    print(
        f"wrote {len(splits.train)} train / {len(splits.val)} val / "
        f"{len(splits.test)} test samples to {args.out}"
    )
    return 0


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise ValueError(f"run directory {run_dir} does not exist")
    summaries = sorted(run_dir.glob("*_summary.tsv"))
    if not summaries:
        raise ValueError(f"no summary files found in {run_dir}")
    for path in summaries:
        print(f"== {path.name} ==")
        print(path.read_text(encoding="utf-8"), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distilselect",
        description="Adaptive dual-gate data selection experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one method over the configured seeds")
    run_p.add_argument("--config", required=True, help="experiment config (JSON)")
    run_p.add_argument("--output-dir", help="override the config's output directory")
    run_p.add_argument("--seeds", help="comma-separated seed override")
    run_p.add_argument("--method", help="method name override")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a hyper-parameter grid")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--grid", required=True, help="JSON file: parameter -> list of values")
    sweep_p.add_argument("--output-dir")
    sweep_p.add_argument("--seeds")
    sweep_p.set_defaults(func=_cmd_sweep)

    gen_p = sub.add_parser("gen-data", help="write a synthetic dataset to a file")
    gen_p.add_argument("--config", required=True)
    gen_p.add_argument("--out", required=True)
    gen_p.set_defaults(func=_cmd_gen_data)

    report_p = sub.add_parser("report", help="print the summaries in a run directory")
    report_p.add_argument("--run-dir", required=True)
    report_p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
