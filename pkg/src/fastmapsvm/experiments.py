"""Experiment harnesses: noise robustness and training-size / dimension sweeps.

Every harness returns a list of :class:`Row` and can be written as CSV with
header ``axis_value,precision,recall,f1,accuracy,balanced_accuracy,auc``.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import pipeline
from .metrics import Metrics, classification_metrics, confusion_matrix, roc_auc
from .waveform_io import LabeledWaveformSet, add_gaussian_noise, circular_shift

CSV_HEADER = ["axis_value", "precision", "recall", "f1", "accuracy", "balanced_accuracy", "auc"]


@dataclass(frozen=True)
class Row:
    axis_value: float
    metrics: Metrics
    auc: float
    n_items: int
    ids: tuple = ()


def evaluate(model: pipeline.FastMapSVMModel, waveforms: Sequence, labels, jobs: int = 1) -> Row:
    """Score ``waveforms`` and summarize against ``labels`` (axis_value left as nan)."""
    waveforms = list(waveforms)
    scores = model.decision_function(waveforms, jobs)
    labels = np.asarray(labels)
    m = classification_metrics(confusion_matrix(labels == 1, scores > 0))
    try:
        auc = roc_auc(scores, labels == 1).auc
    except ValueError:
        auc = math.nan
    return Row(math.nan, m, auc, len(labels), tuple(w.id for w in waveforms))


def item_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for one (item, trial) combination."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(2, np.uint64)[0] >> np.uint64(1))


def sigma_values(sigma_max: float, sigma_step: float) -> list:
    if sigma_step <= 0:
        raise ValueError("sigma_step must be positive")
    if sigma_max < 0:
        raise ValueError("sigma_max must be non-negative")
    n = int(math.floor(sigma_max / sigma_step + 1e-9))
    return [k * sigma_step for k in range(n + 1)]


def noise_robustness_experiment(
    model: pipeline.FastMapSVMModel,
    test: LabeledWaveformSet,
    sigma_max: float = 6.0,
    sigma_step: float = 0.5,
    shift_range_s: tuple = (-2.0, 2.0),
    seed: int = 0,
    jobs: int = 1,
) -> list:
    """Metrics at increasing Gaussian noise levels.

    Each test item is circularly shifted once by a uniform random offset in
    ``shift_range_s``; then, for every sigma, perturbed with fresh seeded
    noise and scored.
    """
    rng = np.random.default_rng(seed)
    lo, hi = shift_range_s
    shifted = [circular_shift(w, rng.uniform(lo, hi)) for w in test.waveforms]
    rows = []
    for k, sigma in enumerate(sigma_values(sigma_max, sigma_step)):
        noisy = [add_gaussian_noise(w, sigma, item_seed(seed, i, k)) for i, w in enumerate(shifted)]
        row = evaluate(model, noisy, test.labels, jobs)
        rows.append(dataclasses.replace(row, axis_value=float(sigma)))
    return rows


def balanced_split(labels, test_per_class: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed balanced held-out indices and the remaining pool (both shuffled)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    test, pool = [], []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        if len(idx) < test_per_class:
            raise ValueError(f"class {c} has {len(idx)} items, fewer than test size {test_per_class}")
        idx = idx[rng.permutation(len(idx))]
        test.append(idx[:test_per_class])
        pool.append(idx[test_per_class:])
    return np.sort(np.concatenate(test)), np.concatenate(pool)


def sensitivity_sweep(
    dataset: LabeledWaveformSet,
    config: pipeline.PipelineConfig,
    axis: str,
    values: Sequence,
    seed: int = 0,
    test_per_class: int | None = None,
    jobs: int = 1,
) -> list:
    """One model per value of ``train_size`` or ``K`` on a fixed balanced test set.

    ``train_size`` values are total training sizes drawn class-balanced from
    the pool left after removing the test set; on the ``K`` axis every model
    trains on the whole pool.
    """
    if axis not in ("train_size", "K"):
        raise ValueError("axis must be 'train_size' or 'K'")
    values = [int(v) for v in values]
    if not values:
        raise ValueError("no sweep values")
    if values != sorted(values):
        raise ValueError("sweep values must be sorted ascending")
    if test_per_class is None:
        test_per_class = min(int(np.sum(dataset.labels == c)) for c in (0, 1)) // 2
    test_idx, pool = balanced_split(dataset.labels, test_per_class, seed)
    test = dataset.subset(test_idx)
    pool_labels = dataset.labels[pool]
    pool_by_class = [pool[pool_labels == c] for c in (0, 1)]

    rows = []
    for v in values:
        if axis == "train_size":
            per_class = v // 2
            if per_class > min(len(p) for p in pool_by_class):
                raise ValueError(f"requested training size {v} exceeds available data")
            train_idx = np.concatenate([p[:per_class] for p in pool_by_class])
            cfg = config
        else:
            train_idx = pool
            cfg = dataclasses.replace(config, ndim=v)
        model = pipeline.fit(dataset.subset(np.sort(train_idx)), cfg)
        row = evaluate(model, test.waveforms, test.labels, jobs)
        rows.append(dataclasses.replace(row, axis_value=float(v)))
    return rows


def held_out_ids(dataset: LabeledWaveformSet, seed: int, test_per_class: int | None = None) -> list:
    """Ids of the evaluation subset :func:`sensitivity_sweep` uses for this seed."""
    if test_per_class is None:
        test_per_class = min(int(np.sum(dataset.labels == c)) for c in (0, 1)) // 2
    test_idx, _ = balanced_split(dataset.labels, test_per_class, seed)
    return [dataset.waveforms[i].id for i in test_idx]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_table_csv(rows: Sequence[Row], path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            m = r.metrics
            w.writerow([_fmt(r.axis_value), _fmt(m.precision), _fmt(m.recall), _fmt(m.f1),
                        _fmt(m.accuracy), _fmt(m.balanced_accuracy), _fmt(r.auc)])
