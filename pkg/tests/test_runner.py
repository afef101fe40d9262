import json
import math

import numpy as np
import pytest

from distilselect.config import (
    ExperimentConfig,
    MethodConfig,
    SelectorConfig,
    StudentConfig,
    load_config,
    parse_config,
)
from distilselect.datagen import SynthConfig, generate, save_dataset
from distilselect.runner import run_experiment, sweep
from distilselect.teacher import SimulatedTeacherConfig, simulate_teacher, write_external


def tiny_cfg(method="dual_gate", seeds=(3,), output_dir=None, **method_kw):
    return ExperimentConfig(
        dataset=SynthConfig(k=3, d=6, n_train=240, n_val=60, n_test=90, class_separation=2.0, rng_seed=11),
        teacher=SimulatedTeacherConfig(base_accuracy=0.75, calibration_strength=1.5, rng_seed=23),
        method=MethodConfig(name=method, **method_kw),
        student=StudentConfig(learning_rate=0.2, epochs=2, batch_size=32),
        seeds=seeds,
        eval_every=5,
        output_dir=output_dir,
    )


def config_dict(**overrides):
    base = {
        "dataset": {
            "kind": "synthetic",
            "k": 3,
            "d": 6,
            "n_train": 120,
            "n_val": 40,
            "n_test": 60,
            "class_separation": 2.0,
            "rng_seed": 1,
        },
        "teacher": {
            "kind": "simulated",
            "base_accuracy": 0.8,
            "calibration_strength": 1.0,
            "rng_seed": 2,
        },
        "method": {"name": "dual_gate"},
        "student": {"learning_rate": 0.1, "epochs": 1, "batch_size": 16},
        "selector": {"lambda_student": 0.9, "lambda_teacher": 0.7},
        "seeds": [0, 1],
        "eval_every": 4,
    }
    base.update(overrides)
    return base


class TestConfigParsing:
    def test_parses_full_config(self):
        cfg = parse_config(config_dict())
        assert cfg.method.name == "dual_gate"
        assert cfg.selector.lambda_teacher == 0.7
        assert cfg.seeds == (0, 1)

    def test_method_may_be_a_bare_string(self):
        cfg = parse_config(config_dict(method="no_selection"))
        assert cfg.method.name == "no_selection"

    def test_rejects_unknown_top_level_key(self):
        with pytest.raises(ValueError, match="unknown top-level config key"):
            parse_config(config_dict(epochs=3))

    def test_rejects_unknown_nested_key(self):
        bad = config_dict()
        bad["selector"] = {"lambda_studnet": 0.9}
        with pytest.raises(ValueError, match=r"lambda_studnet.*selector"):
            parse_config(bad)

    def test_rejects_missing_section(self):
        bad = config_dict()
        del bad["teacher"]
        with pytest.raises(ValueError, match="missing required"):
            parse_config(bad)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            parse_config(config_dict(method="grid_search"))

    def test_rejects_unknown_dataset_kind(self):
        bad = config_dict()
        bad["dataset"] = {"kind": "downloaded", "path": "x"}
        with pytest.raises(ValueError, match="dataset kind"):
            parse_config(bad)

    def test_rejects_bad_lambda(self):
        with pytest.raises(ValueError, match="lambda_student"):
            SelectorConfig(lambda_student=1.0)

    def test_load_config_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config_dict()))
        assert load_config(path).student.batch_size == 16

    def test_load_config_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{nope")
        with pytest.raises(ValueError, match="invalid JSON"):
            load_config(path)


class TestRunExperiment:
    def test_identical_config_and_seed_reproduce_exactly(self):
        first = run_experiment(tiny_cfg())
        second = run_experiment(tiny_cfg())
        a, b = first.per_seed[0], second.per_seed[0]
        assert (a.test_acc, a.test_f1) == (b.test_acc, b.test_f1)
        assert a.ledger.steps == b.ledger.steps
        assert a.ledger.evals == b.ledger.evals
        assert a.threshold_trace == b.threshold_trace

    def test_total_seen_equals_train_size_times_epochs(self):
        for method, kw in (("dual_gate", {}), ("random", {"ratio": 0.5}), ("no_selection", {})):
            result = run_experiment(tiny_cfg(method=method, **kw))
            eff = result.per_seed[0].efficiency
            assert eff.total_seen == 240 * 2

    def test_no_selection_sees_everything(self):
        result = run_experiment(tiny_cfg(method="no_selection"))
        assert result.per_seed[0].selected_fraction == 1.0

    def test_three_seeds_summarized_with_mean_and_std(self):
        result = run_experiment(tiny_cfg(seeds=(0, 1, 2)))
        assert len(result.per_seed) == 3
        accs = [r.test_acc for r in result.per_seed]
        assert result.mean_test_acc == pytest.approx(float(np.mean(accs)), abs=1e-15)
        assert result.std_test_acc == pytest.approx(float(np.std(accs, ddof=1)), abs=1e-15)

    def test_seed_changes_the_run(self):
        result = run_experiment(tiny_cfg(seeds=(0, 1)))
        a, b = result.per_seed
        assert a.ledger.steps[0] != b.ledger.steps[0]

    def test_ledger_signal_bounds_hold(self):
        result = run_experiment(tiny_cfg(seeds=(0,)))
        log_k = math.log(3)
        for rec in result.per_seed[0].ledger.steps:
            assert 0.0 <= rec.uncertainty_min <= rec.uncertainty_max <= log_k
            assert 1 / 3 <= rec.confidence_min <= rec.confidence_max <= 1.0
            assert all(0.0 <= t <= log_k for t in rec.student_thresholds)
            assert all(0.0 <= t <= 1.0 for t in rec.teacher_thresholds)

    def test_gate_only_methods_run(self):
        for method in ("student_gate_only", "teacher_gate_only"):
            result = run_experiment(tiny_cfg(method=method))
            assert 0.0 < result.per_seed[0].selected_fraction <= 1.0

    def test_weighted_method_diverges_only_through_the_loss(self):
        # Same initial params and states: the first step's mask agrees and
        # only the loss differs; trajectories then separate.
        plain = run_experiment(tiny_cfg()).per_seed[0]
        weighted = run_experiment(tiny_cfg(method="dual_gate_weighted")).per_seed[0]
        first_plain, first_weighted = plain.ledger.steps[0], weighted.ledger.steps[0]
        assert first_plain.selected == first_weighted.selected
        assert first_plain.student_thresholds == first_weighted.student_thresholds
        assert first_plain.loss != first_weighted.loss

    def test_non_finite_loss_aborts_with_diagnostic(self, tmp_path):
        # A huge learning rate saturates the softmax after one step; kept
        # samples whose pseudo-label lands on a zero probability then blow
        # the loss up. no_selection keeps everything, so the blowup is hit.
        cfg = tiny_cfg(method="no_selection", output_dir=str(tmp_path))
        cfg = ExperimentConfig(
            dataset=cfg.dataset,
            teacher=cfg.teacher,
            method=cfg.method,
            student=StudentConfig(learning_rate=1e30, epochs=1, batch_size=32),
            seeds=(3,),
            eval_every=5,
            output_dir=str(tmp_path),
        )
        with pytest.raises(RuntimeError, match="non-finite loss"):
            run_experiment(cfg)
        assert list(tmp_path.glob("*_diagnostic.json"))

    def test_writes_report_files(self, tmp_path):
        run_experiment(tiny_cfg(output_dir=str(tmp_path)))
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {
            "dual_gate_seed3_ledger.tsv",
            "dual_gate_seed3_evals.tsv",
            "dual_gate_seed3_thresholds.tsv",
            "dual_gate_seed3_calibration.tsv",
            "dual_gate_summary.tsv",
        }
        summary = (tmp_path / "dual_gate_summary.tsv").read_text().splitlines()
        assert summary[0].startswith("method\tseed\ttest_acc")
        assert len(summary) == 1 + 1 + 2  # header, one seed, mean and std rows

    def test_external_teacher_file_round_trip(self, tmp_path):
        ds = SynthConfig(k=3, d=6, n_train=120, n_val=40, n_test=60, class_separation=2.0, rng_seed=11)
        splits = generate(ds)
        records = simulate_teacher(
            splits.train, SimulatedTeacherConfig(base_accuracy=0.8, calibration_strength=1.0, rng_seed=5), 3
        )
        teacher_path = tmp_path / "teacher.ndjson"
        write_external(teacher_path, records, ["a", "b", "c"])
        cfg_dict = config_dict()
        cfg_dict["dataset"].update({"n_train": 120, "n_val": 40, "n_test": 60, "rng_seed": 11})
        cfg_dict["teacher"] = {"kind": "external", "path": str(teacher_path)}
        result = run_experiment(parse_config(cfg_dict))
        assert len(result.per_seed) == 2

    def test_file_dataset_config(self, tmp_path):
        ds = SynthConfig(k=3, d=6, n_train=120, n_val=40, n_test=60, class_separation=2.0, rng_seed=11)
        data_path = tmp_path / "data.tsv"
        save_dataset(data_path, generate(ds), ds)
        cfg_dict = config_dict()
        cfg_dict["dataset"] = {"kind": "file", "path": str(data_path)}
        result = run_experiment(parse_config(cfg_dict))
        assert result.per_seed[0].efficiency.total_seen == 120


class TestSweep:
    def test_lambda_grid_row_count_and_best_flag(self):
        cfg = tiny_cfg()
        grid = {"lambda_student": [0.1, 0.5, 0.9], "lambda_teacher": [0.3, 0.7]}
        result = sweep(cfg, grid)
        assert len(result.rows) == 6
        best = result.best_row
        assert best.mean_val_acc == max(r.mean_val_acc for r in result.rows)
        assert sum(r.best for r in result.rows) == 1

    def test_beta_grid_covers_all_sixteen_points(self):
        cfg = ExperimentConfig(
            dataset=SynthConfig(k=2, d=4, n_train=64, n_val=20, n_test=30, class_separation=2.0, rng_seed=7),
            teacher=SimulatedTeacherConfig(base_accuracy=0.8, calibration_strength=1.0, rng_seed=1),
            method=MethodConfig(name="dual_gate"),
            student=StudentConfig(learning_rate=0.2, epochs=1, batch_size=32),
            seeds=(0,),
            eval_every=2,
        )
        grid = {
            "beta_student_local": [0, 1],
            "beta_student_global": [0, 1],
            "beta_teacher_local": [0, 1],
            "beta_teacher_global": [0, 1],
        }
        result = sweep(cfg, grid)
        assert len(result.rows) == 16
        assert {row.params for row in result.rows} == {
            (a, b, c, d) for a in (0, 1) for b in (0, 1) for c in (0, 1) for d in (0, 1)
        }

    def test_rejects_unknown_parameter(self):
        with pytest.raises(ValueError, match="unknown sweep parameter"):
            sweep(tiny_cfg(), {"lambda_studnet": [0.5]})

    def test_writes_sweep_table(self, tmp_path):
        cfg = tiny_cfg(output_dir=str(tmp_path))
        sweep(cfg, {"learning_rate": [0.1, 0.2]})
        lines = (tmp_path / "sweep.tsv").read_text().splitlines()
        assert lines[0] == "learning_rate\tmean_val_acc\tmean_test_acc\tbest"
        assert len(lines) == 3
