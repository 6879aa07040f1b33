import json

import numpy as np
import pytest

from fastmapsvm import fastmap, pipeline, synthetic
from fastmapsvm.distance import CountingDistance, ncc_distance
from fastmapsvm.pipeline import ModalityError, ModelFormatError, PipelineConfig
from fastmapsvm.waveform_io import LabeledWaveformSet, Waveform


def _files(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_training_accuracy_on_separable_set():
    ds = synthetic.make_dataset(64, 64, seed=21)
    model = pipeline.fit(ds, PipelineConfig(ndim=4, seed=0, folds=3))
    labels = np.array([lab for lab, _ in pipeline.predict(model, ds.waveforms)])
    assert np.mean(labels == ds.labels) >= 0.98


def test_refit_byte_identical(tmp_path, small_train):
    cfg = PipelineConfig(ndim=3, seed=4, C_grid=(0.1, 1.0), gamma_grid=("scale", 0.1), folds=3)
    pipeline.save_model(pipeline.fit(small_train, cfg), tmp_path / "a")
    pipeline.save_model(pipeline.fit(small_train, cfg), tmp_path / "b")
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_too_few_per_class(small_train):
    with pytest.raises(fastmap.InsufficientDataError):
        pipeline.fit(small_train, PipelineConfig(ndim=40))


def test_predict_reproduces_training_coordinates(small_model, small_train):
    objs = small_model.preprocess([w.as_float32() for w in small_train.waveforms])
    _, coords = fastmap.fit_embedding(objs, small_train.labels, ncc_distance, 4, seed=0)
    np.testing.assert_allclose(small_model.transform(small_train.waveforms), small_model.scale(coords), atol=1e-9)


def test_reference_objects_predict_their_class(small_model):
    for w, lab in zip(small_model.raw_references, small_model.embedding.reference_labels):
        assert pipeline.predict(small_model, [w])[0][0] == lab


def test_references_stored_verbatim(small_model, small_train):
    for i, w in zip(small_model.embedding.reference_index, small_model.raw_references):
        assert w == small_train.waveforms[i].as_float32()


def test_two_k_evaluations_per_object(small_model, small_test):
    counter = CountingDistance(small_model.distance)
    small_model.distance = counter
    try:
        pipeline.predict(small_model, small_test.waveforms[:5])
    finally:
        small_model.distance = counter.inner
    assert counter.count == 5 * 2 * small_model.embedding.effective_ndim


def test_save_load_predict_identical(tmp_path, small_model, small_test):
    pipeline.save_model(small_model, tmp_path / "m")
    loaded = pipeline.load_model(tmp_path / "m")
    assert pipeline.predict(loaded, small_test.waveforms) == pipeline.predict(small_model, small_test.waveforms)


def test_unknown_version(tmp_path, small_model):
    pipeline.save_model(small_model, tmp_path / "m")
    f = tmp_path / "m" / "model.json"
    d = json.loads(f.read_text())
    d["format_version"] = 42
    f.write_text(json.dumps(d))
    with pytest.raises(ModelFormatError, match="format_version"):
        pipeline.load_model(tmp_path / "m")


def test_corrupt_model(tmp_path, small_model):
    pipeline.save_model(small_model, tmp_path / "m")
    f = tmp_path / "m" / "model.json"
    d = json.loads(f.read_text())
    del d["svm"]
    f.write_text(json.dumps(d))
    with pytest.raises(ModelFormatError):
        pipeline.load_model(tmp_path / "m")


def test_wrong_channel_count(small_model, rng):
    w = Waveform(rng.standard_normal((2, 800)), 100.0, "two-channel")
    with pytest.raises(ModalityError):
        pipeline.predict(small_model, [w])


def test_wrong_rate(small_model, rng):
    with pytest.raises(ModalityError):
        pipeline.predict(small_model, [Waveform(rng.standard_normal((3, 800)), 50.0)])


def test_amplitude_scaling_keeps_labels(small_model, small_test):
    base = pipeline.predict(small_model, small_test.waveforms)
    scaled = [w.replace(w.data * f) for w, f in zip(small_test.waveforms, np.linspace(0.01, 50, len(small_test)))]
    assert [p[0] for p in pipeline.predict(small_model, scaled)] == [p[0] for p in base]


def test_config_echo(small_model):
    c = small_model.config
    assert c["ndim"] == 4 and c["distance_name"] == "ncc"
    assert c["label_map"] == {"0": -1, "1": 1}
    assert small_model.svm.kernel.gamma > 0
    assert np.all(small_model.scaler_std > 0)


def test_gamma_scale_recorded(tmp_path, small_model):
    pipeline.save_model(small_model, tmp_path / "m")
    d = json.loads((tmp_path / "m" / "model.json").read_text())
    assert d["config"]["selected_gamma"] == "scale"
    assert d["svm"]["gamma"] == small_model.svm.kernel.gamma


def test_grid_search_path_records_scores(small_train):
    m = pipeline.fit(small_train, PipelineConfig(ndim=2, C_grid=(0.1, 10.0), gamma_grid=("scale",), folds=3))
    assert len(m.config["grid_scores"]) == 2


def test_linear_kernel(small_train, small_test):
    m = pipeline.fit(small_train, PipelineConfig(ndim=3, kernel="linear", C_grid=(1.0,)))
    assert m.svm.kernel.kind == "linear"
    assert len(pipeline.predict(m, small_test.waveforms)) == len(small_test)


def test_more_data_keeps_reference_candidates(small_train):
    # The used set only ever grows by one pair per dimension, so every superset
    # still leaves unused candidates of both classes at each iteration.
    for n in (4, 8, 16, 32):
        idx = [i for c in (0, 1) for i in np.flatnonzero(small_train.labels == c)[:n]]
        m = pipeline.fit(small_train.subset(idx), PipelineConfig(ndim=4, C_grid=(1.0,), gamma_grid=("scale",)))
        refs = m.embedding.reference_index.tolist()
        assert len(set(refs)) == 8
        assert sorted(m.embedding.reference_labels.tolist()) == [0] * 4 + [1] * 4


def test_empty_predict(small_model):
    assert pipeline.predict(small_model, []) == []


def test_jobs_do_not_change_scores(small_model, small_test):
    a = small_model.decision_function(small_test.waveforms, jobs=1)
    b = small_model.decision_function(small_test.waveforms, jobs=4)
    assert np.array_equal(a, b)


def test_single_class_training_set_rejected(rng):
    ws = [Waveform(rng.standard_normal((3, 800)), 100.0, str(i)) for i in range(4)]
    with pytest.raises(ValueError):
        pipeline.fit(LabeledWaveformSet(ws, [1, 1, 1, 1]), PipelineConfig(ndim=1))
