"""Deterministic synthetic classification datasets.

Isotropic unit-variance Gaussian clusters with centers placed at a
configurable pairwise separation. Gold labels are attached to every split;
the training split's labels exist only so a simulated teacher can corrupt
them and so selection quality can be evaluated against the truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Sample, _check_ids_disjoint, _check_shared_dim

_MAX_CENTER_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthConfig:
    k: int
    d: int
    n_train: int
    n_test: int
    class_separation: float
    n_val: int = 500
    rng_seed: int = 0
    class_proportions: tuple[float, ...] | None = None  # default balanced

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("all split sizes must be at least 1")
        if not self.class_separation > 0:
            raise ValueError("class_separation must be positive")
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")
        if self.class_proportions is not None:
            props = tuple(float(p) for p in self.class_proportions)
            if len(props) != self.k:
                raise ValueError("class_proportions must have one entry per class")
            if any(p <= 0 for p in props):
                raise ValueError("class_proportions must be positive")
            if abs(sum(props) - 1.0) > 1e-9:
                raise ValueError("class_proportions must sum to 1")
            object.__setattr__(self, "class_proportions", props)


@dataclass(frozen=True)
class SampleSplits:
    """Raw train/val/test samples, before any pseudo-labeling."""

    train: tuple[Sample, ...]
    val: tuple[Sample, ...]
    test: tuple[Sample, ...]

    def __post_init__(self) -> None:
        train = tuple(self.train)
        val = tuple(self.val)
        test = tuple(self.test)
        _check_ids_disjoint(train, val, test)
        _check_shared_dim(list(train) + list(val) + list(test))
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "val", val)
        object.__setattr__(self, "test", test)

    @property
    def dim(self) -> int:
        return self.train[0].dim


def _place_centers(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Random directions scaled until all pairwise center distances reach the separation."""
    for attempt in range(_MAX_CENTER_ATTEMPTS):
        directions = rng.standard_normal((cfg.k, cfg.d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radius = cfg.class_separation * (1.0 + 0.25 * attempt)
        centers = radius * directions
        diffs = centers[:, None, :] - centers[None, :, :]
        dists = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(dists, np.inf)
        if dists.min() >= cfg.class_separation:
            return centers
    raise RuntimeError(
        "could not place class centers at the requested separation; try a larger d"
    )


def _split_labels(cfg: SynthConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if cfg.class_proportions is None:
        labels = np.arange(n) % cfg.k  # round-robin keeps classes balanced
    else:
        raw = np.array(cfg.class_proportions) * n
        counts = np.floor(raw).astype(int)
        remainder = n - counts.sum()
        # Largest fractional parts absorb the remainder; ties by class index.
        order = np.argsort(-(raw - counts), kind="stable")
        for y in order[:remainder]:
            counts[y] += 1
        labels = np.repeat(np.arange(cfg.k), counts)
    return labels[rng.permutation(n)]


def generate(cfg: SynthConfig) -> SampleSplits:
    """Deterministically generate gold-labeled train/val/test splits."""
    rng = np.random.default_rng(cfg.rng_seed)
    centers = _place_centers(cfg, rng)
    next_id = 0
    splits = []
    for n in (cfg.n_train, cfg.n_val, cfg.n_test):
        labels = _split_labels(cfg, n, rng)
        noise = rng.standard_normal((n, cfg.d))
        features = centers[labels] + noise
        samples = tuple(
            Sample(id=next_id + i, features=features[i], gold_label=int(labels[i]))
            for i in range(n)
        )
        next_id += n
        splits.append(samples)
    return SampleSplits(train=splits[0], val=splits[1], test=splits[2])


def save_dataset(path: str | Path, splits: SampleSplits, cfg: SynthConfig) -> None:
    """Dump splits as delimited text: a header row, then one `id label features...` row per sample."""
    lines = [
        "\t".join(
            str(v)
            for v in (cfg.k, splits.dim, len(splits.train), len(splits.val), len(splits.test), cfg.rng_seed)
        )
    ]
    for group in (splits.train, splits.val, splits.test):
        for s in group:
            fields = [str(s.id), str(s.gold_label)]
            fields.extend(repr(float(v)) for v in s.features)
            lines.append("\t".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path: str | Path) -> tuple[SampleSplits, dict[str, int]]:
    """Read a dataset written by ``save_dataset``; returns the splits and header fields."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = lines[0].split("\t")
    if len(header) != 6:
        raise ValueError(f"{path}: header must have 6 fields, found {len(header)}")
    k, d, n_train, n_val, n_test, seed = (int(v) for v in header)
    expected = n_train + n_val + n_test
    rows = lines[1:]
    if len(rows) != expected:
        raise ValueError(f"{path}: expected {expected} sample rows, found {len(rows)}")

    def parse(row: str, lineno: int) -> Sample:
        fields = row.split("\t")
        if len(fields) != 2 + d:
            raise ValueError(f"{path}: line {lineno}: expected {2 + d} fields")
        gold = int(fields[1])
        if not 0 <= gold < k:
            raise ValueError(f"{path}: line {lineno}: gold label outside [0, {k})")
        return Sample(
            id=int(fields[0]),
            features=np.array([float(v) for v in fields[2:]]),
            gold_label=gold,
        )

    samples = [parse(row, i + 2) for i, row in enumerate(rows)]
    splits = SampleSplits(
        train=tuple(samples[:n_train]),
        val=tuple(samples[n_train : n_train + n_val]),
        test=tuple(samples[n_train + n_val :]),
    )
    meta = {"k": k, "d": d, "n_train": n_train, "n_val": n_val, "n_test": n_test, "rng_seed": seed}
    return splits, meta
