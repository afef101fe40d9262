"""Pseudo-label sources: a calibrated simulated teacher and a file ingester.

The simulator stands in for a fixed large teacher model. It draws a
confidence per sample from a Beta distribution rescaled to [1/K, 1] and emits
the correct label with a probability that rises with that confidence, so
that confidence is statistically predictive of correctness. The strength of
that link is controlled by ``calibration_strength`` (0 means confidence and
correctness are independent), and the link is shifted so the marginal
pseudo-label accuracy matches ``base_accuracy``.

The ingester reads externally produced probability vectors from a
newline-delimited JSON file, validating every record and recomputing the
pseudo-label and confidence rather than trusting stored values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import expit

from .core import LabelSet, ProbDist, PseudoLabeledSample, Sample

# Keeps the drawn confidence strictly above 1/K so the pseudo-label is always
# the unique argmax of the constructed probability vector.
_MIN_CONF_GAP = 1e-9


@dataclass(frozen=True)
class SimulatedTeacherConfig:
    """Knobs for the simulated teacher.

    base_accuracy: target marginal pseudo-label accuracy, in (1/K, 1].
    calibration_strength: how strongly confidence predicts correctness, in
        logits per standard deviation of the confidence distribution;
        0 makes confidence and correctness independent.
    confidence_shape: (a, b) of the Beta distribution the confidence is
        drawn from before rescaling to [1/K, 1].
    rng_seed: base seed; each sample's stream is derived from (seed, id).
    """

    base_accuracy: float
    calibration_strength: float
    confidence_shape: tuple[float, float] = (2.0, 2.0)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.base_accuracy <= 1.0:
            raise ValueError("base_accuracy must lie in (0, 1]")
        if self.calibration_strength < 0.0:
            raise ValueError("calibration_strength must be nonnegative")
        a, b = self.confidence_shape
        if not (a > 0 and b > 0):
            raise ValueError("confidence_shape parameters must be positive")
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")
        object.__setattr__(self, "confidence_shape", (float(a), float(b)))


def _correctness_curve(cfg: SimulatedTeacherConfig, k: int) -> Callable[[float], float]:
    """Monotone map from confidence to P(correct), averaging to base_accuracy.

    The curve is a logistic in (c - mean confidence). Its slope is the
    calibration strength per standard deviation of the confidence
    distribution, so the strength means the same thing for any confidence
    shape; the offset is solved numerically so the expectation over the
    rescaled Beta confidence distribution hits the target accuracy.
    """
    if cfg.base_accuracy >= 1.0 - 1e-12:
        return lambda c: 1.0
    if cfg.calibration_strength == 0.0:
        target = cfg.base_accuracy
        return lambda c: target

    lo = 1.0 / k
    span = 1.0 - lo
    a, b = cfg.confidence_shape
    mean_conf = lo + span * a / (a + b)
    std_conf = span * math.sqrt(a * b) / ((a + b) * math.sqrt(a + b + 1.0))
    slope = cfg.calibration_strength / std_conf
    beta_dist = stats.beta(a, b)

    def expected_accuracy(offset: float) -> float:
        def integrand(x: float) -> float:
            c = lo + span * x
            return expit(slope * (c - mean_conf) + offset) * beta_dist.pdf(x)

        value, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
        return value

    offset = optimize.brentq(
        lambda d: expected_accuracy(d) - cfg.base_accuracy, -80.0, 80.0, xtol=1e-12
    )
    return lambda c: float(expit(slope * (c - mean_conf) + offset))


def _teacher_probs(confidence: float, pseudo_label: int, k: int) -> np.ndarray:
    """Mass `confidence` on the pseudo-label, the remainder spread uniformly."""
    probs = np.full(k, (1.0 - confidence) / (k - 1))
    probs[pseudo_label] = confidence
    return probs


def simulate_teacher(
    samples: Sequence[Sample],
    cfg: SimulatedTeacherConfig,
    k: int,
) -> list[PseudoLabeledSample]:
    """Pseudo-label `samples` with confidence-calibrated synthetic noise.

    Deterministic: every sample draws from its own RNG stream derived from
    (cfg.rng_seed, sample.id), so results do not depend on ordering and are
    reproducible across runs.
    """
    if k < 2:
        raise ValueError("need at least 2 classes")
    if cfg.base_accuracy <= 1.0 / k:
        raise ValueError(f"base_accuracy must exceed chance level 1/{k}")
    curve = _correctness_curve(cfg, k)
    lo = 1.0 / k
    span = 1.0 - lo
    a, b = cfg.confidence_shape
    out = []
    for sample in samples:
        if sample.gold_label is None:
            raise ValueError(f"sample {sample.id} has no gold label to corrupt")
        if sample.gold_label >= k:
            raise ValueError(f"sample {sample.id} gold label outside [0, {k})")
        rng = np.random.default_rng([cfg.rng_seed, sample.id])
        conf = lo + span * float(rng.beta(a, b))
        conf = min(max(conf, lo + _MIN_CONF_GAP), 1.0)
        correct = float(rng.random()) < curve(conf)
        if correct:
            label = sample.gold_label
        else:
            draw = int(rng.integers(k - 1))
            label = draw if draw < sample.gold_label else draw + 1
        out.append(
            PseudoLabeledSample(
                sample=sample,
                pseudo_label=label,
                teacher_probs=ProbDist(_teacher_probs(conf, label, k)),
                confidence=conf,
            )
        )
    return out


def write_external(
    path: str | Path,
    records: Sequence[PseudoLabeledSample],
    label_names: Sequence[str],
) -> None:
    """Write pseudo-label records in the newline-delimited JSON exchange format."""
    labels = LabelSet(tuple(label_names))
    lines = [json.dumps({"k": labels.k, "labels": list(labels.names)})]
    for rec in records:
        lines.append(
            json.dumps(
                {
                    "id": rec.sample.id,
                    "probs": [float(v) for v in rec.teacher_probs.probs],
                    "pseudo_label": rec.pseudo_label,
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_RECORD_FIELDS = {"id", "probs", "pseudo_label"}


def ingest_external(
    path: str | Path,
    samples: Sequence[Sample] | Mapping[int, Sample],
) -> list[PseudoLabeledSample]:
    """Parse an external pseudo-label file and join it against known samples.

    The file is newline-delimited JSON: a header record declaring `k` and the
    label names, then one record per sample with `id`, `probs`, and an
    optional `pseudo_label` that must agree with the recomputed argmax.
    Stored values are never trusted: the pseudo-label and confidence are
    recomputed from the probability vector, and any disagreement is an error.
    Records carry no features, so the caller supplies the sample pool to
    attach them by id.
    """
    if isinstance(samples, Mapping):
        pool = dict(samples)
    else:
        pool = {}
        for s in samples:
            if s.id in pool:
                raise ValueError(f"duplicate sample id {s.id} in sample pool")
            pool[s.id] = s

    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"{path}: empty pseudo-label file")

    def fail(lineno: int, message: str) -> ValueError:
        return ValueError(f"{path}: line {lineno}: {message}")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise fail(1, f"invalid JSON header: {exc}") from exc
    if not isinstance(header, dict) or set(header) != {"k", "labels"}:
        raise fail(1, "header must declare exactly 'k' and 'labels'")
    try:
        labels = LabelSet(tuple(header["labels"]))
    except ValueError as exc:
        raise fail(1, str(exc)) from exc
    if header["k"] != labels.k:
        raise fail(1, f"header k={header['k']} does not match {labels.k} label names")

    out = []
    seen_ids: set[int] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise fail(lineno, f"invalid JSON record: {exc}") from exc
        if not isinstance(obj, dict):
            raise fail(lineno, "record must be a JSON object")
        unknown = set(obj) - _RECORD_FIELDS
        if unknown:
            raise fail(lineno, f"unknown record fields {sorted(unknown)}")
        if "id" not in obj or "probs" not in obj:
            raise fail(lineno, "record must include 'id' and 'probs'")
        sid = obj["id"]
        if not isinstance(sid, int):
            raise fail(lineno, "'id' must be an integer")
        if sid in seen_ids:
            raise fail(lineno, f"duplicate record for sample id {sid}")
        seen_ids.add(sid)
        if sid not in pool:
            raise fail(lineno, f"unknown sample id {sid}")
        probs = obj["probs"]
        if not isinstance(probs, list) or len(probs) != labels.k:
            raise fail(lineno, f"'probs' must be an array of {labels.k} reals")
        try:
            dist = ProbDist(np.asarray(probs, dtype=float))
        except ValueError as exc:
            raise fail(lineno, str(exc)) from exc
        rec = PseudoLabeledSample.from_probs(pool[sid], dist)
        if "pseudo_label" in obj and obj["pseudo_label"] != rec.pseudo_label:
            raise fail(lineno, "label/argmax mismatch")
        out.append(rec)
    return out
