import math

import numpy as np
import pytest
from scipy import stats

from distilselect.core import Sample
from distilselect.teacher import (
    SimulatedTeacherConfig,
    _teacher_probs,
    ingest_external,
    simulate_teacher,
    write_external,
)


def gold_samples(n, k, d=3, seed=0):
    rng = np.random.default_rng(seed)
    return [
        Sample(id=i, features=rng.standard_normal(d), gold_label=i % k)
        for i in range(n)
    ]


def bin_accuracies(records, k, n_bins):
    edges = np.linspace(1.0 / k, 1.0, n_bins + 1)
    confs = np.array([r.confidence for r in records])
    hits = np.array([1 if r.pseudo_label == r.sample.gold_label else 0 for r in records])
    idx = np.clip(np.searchsorted(edges, confs, side="right") - 1, 0, n_bins - 1)
    return [(int((idx == b).sum()), hits[idx == b]) for b in range(n_bins)]


class TestSimulatedTeacherConfig:
    def test_rejects_bad_accuracy(self):
        with pytest.raises(ValueError):
            SimulatedTeacherConfig(base_accuracy=1.2, calibration_strength=1.0)

    def test_rejects_negative_strength(self):
        with pytest.raises(ValueError):
            SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=-0.5)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=1.0, confidence_shape=(0.0, 1.0))


class TestTeacherProbs:
    def test_construction_rule(self):
        probs = _teacher_probs(0.9, 2, 5)
        assert probs[2] == 0.9
        np.testing.assert_allclose(probs, [0.025, 0.025, 0.9, 0.025, 0.025], atol=1e-12)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)


class TestSimulateTeacher:
    def test_requires_gold_labels(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=0.0)
        with pytest.raises(ValueError, match="gold label"):
            simulate_teacher([Sample(id=0, features=np.zeros(3))], cfg, 5)

    def test_rejects_chance_level_accuracy(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.2, calibration_strength=0.0)
        with pytest.raises(ValueError, match="chance"):
            simulate_teacher(gold_samples(4, 5), cfg, 5)

    def test_deterministic_and_order_independent(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=1.0, rng_seed=9)
        samples = gold_samples(50, 4)
        first = simulate_teacher(samples, cfg, 4)
        second = simulate_teacher(samples, cfg, 4)
        reversed_run = simulate_teacher(list(reversed(samples)), cfg, 4)
        assert [r.pseudo_label for r in first] == [r.pseudo_label for r in second]
        assert [r.confidence for r in first] == [r.confidence for r in second]
        by_id = {r.sample.id: r for r in reversed_run}
        assert all(by_id[r.sample.id].pseudo_label == r.pseudo_label for r in first)

    def test_records_satisfy_invariants(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.8, calibration_strength=2.0, rng_seed=3)
        for rec in simulate_teacher(gold_samples(200, 5), cfg, 5):
            assert 1.0 / 5 < rec.confidence <= 1.0
            assert rec.teacher_probs.probs[rec.pseudo_label] == rec.confidence

    def test_uncalibrated_matches_base_accuracy(self):
        # Monte-Carlo over 10000 draws; binomial 95% interval is ~0.009 wide.
        cfg = SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=0.0, rng_seed=11)
        records = simulate_teacher(gold_samples(10000, 5), cfg, 5)
        acc = np.mean([r.pseudo_label == r.sample.gold_label for r in records])
        assert abs(acc - 0.7) < 0.02

    def test_uncalibrated_accuracy_independent_of_confidence(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=0.0, rng_seed=11)
        records = simulate_teacher(gold_samples(10000, 5), cfg, 5)
        table = []
        for count, hits in bin_accuracies(records, 5, 5):
            if count > 0:
                table.append([int(hits.sum()), count - int(hits.sum())])
        _, p_value, _, _ = stats.chi2_contingency(np.array(table))
        assert p_value >= 0.01

    def test_calibrated_accuracy_rises_with_confidence(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=2.0, rng_seed=11)
        records = simulate_teacher(gold_samples(10000, 5), cfg, 5)
        bins = [(c, h) for c, h in bin_accuracies(records, 5, 10) if c > 0]
        n_top, top = bins[-1]
        n_bot, bottom = bins[0]
        acc_top, acc_bot = top.mean(), bottom.mean()
        pooled = (top.sum() + bottom.sum()) / (n_top + n_bot)
        se = math.sqrt(pooled * (1 - pooled) * (1 / n_top + 1 / n_bot))
        assert acc_top - acc_bot > 2 * se

    def test_calibrated_marginal_accuracy_still_matches_target(self):
        cfg = SimulatedTeacherConfig(base_accuracy=0.7, calibration_strength=2.0, rng_seed=17)
        records = simulate_teacher(gold_samples(10000, 5), cfg, 5)
        acc = np.mean([r.pseudo_label == r.sample.gold_label for r in records])
        assert abs(acc - 0.7) < 0.02

    def test_perfect_accuracy_never_corrupts(self):
        cfg = SimulatedTeacherConfig(base_accuracy=1.0, calibration_strength=2.0, rng_seed=5)
        records = simulate_teacher(gold_samples(300, 4), cfg, 4)
        assert all(r.pseudo_label == r.sample.gold_label for r in records)


class TestIngestExternal:
    def test_round_trips_written_records(self, tmp_path):
        cfg = SimulatedTeacherConfig(base_accuracy=0.8, calibration_strength=1.0, rng_seed=2)
        samples = gold_samples(20, 3)
        records = simulate_teacher(samples, cfg, 3)
        path = tmp_path / "teacher.ndjson"
        write_external(path, records, ["x", "y", "z"])
        loaded = ingest_external(path, samples)
        assert [r.pseudo_label for r in loaded] == [r.pseudo_label for r in records]
        assert [r.confidence for r in loaded] == [r.confidence for r in records]

    def test_accepts_consistent_record(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text(
            '{"k": 3, "labels": ["a", "b", "c"]}\n'
            '{"id": 0, "probs": [0.1, 0.7, 0.2], "pseudo_label": 1}\n'
        )
        (rec,) = ingest_external(path, gold_samples(1, 3))
        assert rec.pseudo_label == 1
        assert rec.confidence == 0.7

    def test_rejects_label_argmax_mismatch(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text(
            '{"k": 3, "labels": ["a", "b", "c"]}\n'
            '{"id": 0, "probs": [0.1, 0.7, 0.2], "pseudo_label": 0}\n'
        )
        with pytest.raises(ValueError, match=r"line 2: label/argmax mismatch"):
            ingest_external(path, gold_samples(1, 3))

    def test_rejects_sum_out_of_tolerance(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text(
            '{"k": 2, "labels": ["a", "b"]}\n'
            '{"id": 0, "probs": [0.5, 0.6]}\n'
        )
        with pytest.raises(ValueError, match="out of tolerance"):
            ingest_external(path, gold_samples(1, 2))

    def test_rejects_malformed_json_with_line_number(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text('{"k": 2, "labels": ["a", "b"]}\n{not json\n')
        with pytest.raises(ValueError, match="line 2"):
            ingest_external(path, gold_samples(1, 2))

    def test_rejects_unknown_sample_id(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text(
            '{"k": 2, "labels": ["a", "b"]}\n{"id": 99, "probs": [0.4, 0.6]}\n'
        )
        with pytest.raises(ValueError, match="unknown sample id 99"):
            ingest_external(path, gold_samples(1, 2))

    def test_rejects_unknown_record_field(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text(
            '{"k": 2, "labels": ["a", "b"]}\n'
            '{"id": 0, "probs": [0.4, 0.6], "pseudolabel": 1}\n'
        )
        with pytest.raises(ValueError, match="unknown record field"):
            ingest_external(path, gold_samples(1, 2))

    def test_rejects_duplicate_record(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text(
            '{"k": 2, "labels": ["a", "b"]}\n'
            '{"id": 0, "probs": [0.4, 0.6]}\n'
            '{"id": 0, "probs": [0.4, 0.6]}\n'
        )
        with pytest.raises(ValueError, match="line 3: duplicate record"):
            ingest_external(path, gold_samples(1, 2))

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "t.ndjson"
        path.write_text('{"k": 3, "labels": ["a", "b"]}\n')
        with pytest.raises(ValueError, match="line 1"):
            ingest_external(path, gold_samples(1, 2))
