import dataclasses
import math

import numpy as np
import pytest

from fastmapsvm import experiments, pipeline, synthetic
from fastmapsvm.pipeline import PipelineConfig
from fastmapsvm.waveform_io import circular_shift


def test_sigma_values():
    assert experiments.sigma_values(6, 0.5) == [k * 0.5 for k in range(13)]
    assert experiments.sigma_values(1, 0.3) == [0.0, 0.3, 0.6, 0.8999999999999999]
    with pytest.raises(ValueError):
        experiments.sigma_values(1, 0)


def test_item_seed_distinct():
    seeds = {experiments.item_seed(0, i, k) for i in range(20) for k in range(5)}
    assert len(seeds) == 100
    assert experiments.item_seed(3, 1, 2) == experiments.item_seed(3, 1, 2)


def test_noise_experiment_deterministic(small_model, small_test, tmp_path):
    a = experiments.noise_robustness_experiment(small_model, small_test, sigma_max=1.0, sigma_step=0.5, seed=2)
    b = experiments.noise_robustness_experiment(small_model, small_test, sigma_max=1.0, sigma_step=0.5, seed=2)
    assert [r.axis_value for r in a] == [0.0, 0.5, 1.0]
    experiments.write_table_csv(a, tmp_path / "a.csv")
    experiments.write_table_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(experiments.CSV_HEADER)


def test_evaluate_single_class_auc_nan(small_model, small_test):
    idx = np.flatnonzero(small_test.labels == 1)
    row = experiments.evaluate(small_model, [small_test.waveforms[i] for i in idx], small_test.labels[idx])
    assert math.isnan(row.auc)
    assert row.n_items == len(idx)


def test_balanced_split():
    labels = np.array([0] * 10 + [1] * 6)
    test, pool = experiments.balanced_split(labels, 3, 0)
    assert np.sum(labels[test] == 0) == 3 and np.sum(labels[test] == 1) == 3
    assert len(set(test) | set(pool)) == 16 and not set(test) & set(pool)
    with pytest.raises(ValueError):
        experiments.balanced_split(labels, 7, 0)


def test_sweep_train_size():
    ds = synthetic.make_dataset(30, 30, seed=4)
    cfg = PipelineConfig(ndim=2, C_grid=(1.0,), gamma_grid=("scale",))
    rows = experiments.sensitivity_sweep(ds, cfg, "train_size", [8, 16], seed=1, test_per_class=10)
    assert [r.axis_value for r in rows] == [8.0, 16.0]
    assert all(r.n_items == 20 for r in rows)
    assert len(experiments.held_out_ids(ds, 1, 10)) == 20


def test_sweep_k():
    ds = synthetic.make_dataset(20, 20, seed=4)
    cfg = PipelineConfig(C_grid=(1.0,), gamma_grid=("scale",))
    rows = experiments.sensitivity_sweep(ds, cfg, "K", [1, 3], seed=0)
    assert [r.axis_value for r in rows] == [1.0, 3.0]


@pytest.mark.parametrize("axis,values", [("bogus", [1]), ("K", []), ("K", [3, 1]), ("train_size", [400])])
def test_sweep_validation(axis, values):
    ds = synthetic.make_dataset(10, 10, seed=4)
    with pytest.raises(ValueError):
        experiments.sensitivity_sweep(ds, PipelineConfig(ndim=1), axis, values)


def test_sigma_zero_row_is_plain_evaluation_of_shifted_set(small_model, small_test):
    rows = experiments.noise_robustness_experiment(small_model, small_test, sigma_max=0.5, seed=4)
    rng = np.random.default_rng(4)
    shifted = [circular_shift(w, rng.uniform(-2, 2)) for w in small_test.waveforms]
    plain = experiments.evaluate(small_model, shifted, small_test.labels)
    assert rows[0].metrics == plain.metrics and rows[0].auc == plain.auc


def test_separable_recall_at_zero_sigma(small_model, small_test):
    rows = experiments.noise_robustness_experiment(small_model, small_test, sigma_max=0.0)
    assert len(rows) == 1 and rows[0].metrics.recall == 1.0


def test_train_size_sweep_reuses_held_out_ids():
    ds = synthetic.make_dataset(30, 30, seed=6)
    cfg = PipelineConfig(ndim=2, C_grid=(1.0,), gamma_grid=("scale",))
    rows = experiments.sensitivity_sweep(ds, cfg, "train_size", [4, 10, 20], seed=2, test_per_class=8)
    assert all(set(r.ids) == set(rows[0].ids) for r in rows)
    assert set(rows[0].ids) == set(experiments.held_out_ids(ds, 2, 8))


def test_single_value_sweep_matches_direct_fit():
    ds = synthetic.make_dataset(20, 20, seed=7)
    cfg = PipelineConfig(ndim=2, C_grid=(1.0,), gamma_grid=("scale",))
    (row,) = experiments.sensitivity_sweep(ds, cfg, "K", [3], seed=1, test_per_class=5)
    test_idx, pool = experiments.balanced_split(ds.labels, 5, 1)
    model = pipeline.fit(ds.subset(np.sort(pool)), dataclasses.replace(cfg, ndim=3))
    direct = experiments.evaluate(model, ds.subset(test_idx).waveforms, ds.labels[test_idx])
    assert row.metrics == direct.metrics and row.auc == direct.auc


def test_k_sweep_direction():
    ds = synthetic.make_dataset(40, 40, seed=8)
    cfg = PipelineConfig(C_grid=(1.0,), gamma_grid=("scale",))
    rows = experiments.sensitivity_sweep(ds, cfg, "K", [1, 2, 4, 8], seed=0)
    assert rows[-1].metrics.accuracy >= rows[0].metrics.accuracy - 0.02
