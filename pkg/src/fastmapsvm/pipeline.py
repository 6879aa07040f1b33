"""FastMapSVM: preprocessing, FastMap embedding, standardization and SVM in one model."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import fastmap, svm
from .distance import get_distance
from .waveform_io import (
    LabeledWaveformSet,
    Preprocessing,
    Waveform,
    dump_json,
    read_manifest,
    read_wfs_items,
    replace_directory,
    write_wfs_items,
)

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
MODEL_FILE = "model.json"
REFS_DIR = "refs"


class ModelFormatError(ValueError):
    pass


class ModalityError(ValueError):
    pass


@dataclass
class PipelineConfig:
    ndim: int = 8
    seed: int = 0
    distance_name: str = "ncc"
    preprocessing: Preprocessing = field(default_factory=Preprocessing)
    C_grid: Sequence[float] = svm.DEFAULT_C_GRID
    gamma_grid: Sequence = svm.DEFAULT_GAMMA_GRID
    folds: int = 5
    kernel: str = "rbf"
    scoring: str = "f1"
    swap_rounds: int = 1
    epsilon: float = fastmap.DEFAULT_EPSILON
    jobs: int = 1

    def to_dict(self) -> dict:
        return {
            "ndim": self.ndim,
            "seed": self.seed,
            "distance_name": self.distance_name,
            "C_grid": [float(c) for c in self.C_grid],
            "gamma_grid": [g if g == "scale" else float(g) for g in self.gamma_grid],
            "folds": self.folds,
            "kernel": self.kernel,
            "scoring": self.scoring,
            "swap_rounds": self.swap_rounds,
            "epsilon": self.epsilon,
        }


@dataclass
class FastMapSVMModel:
    embedding: fastmap.EmbeddingModel
    raw_references: list
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    svm: svm.SVMModel
    class_names: tuple
    preprocessing: Preprocessing
    config: dict
    sample_rate_hz: float
    n_channels: int
    distance: Callable = field(default=None, repr=False)

    def __post_init__(self):
        if self.distance is None:
            self.distance = get_distance(self.config["distance_name"])

    @property
    def ndim(self) -> int:
        return self.embedding.ndim

    def _filter(self):
        return self.preprocessing.design(self.sample_rate_hz)

    def check_modality(self, w: Waveform) -> None:
        if w.n_channels != self.n_channels:
            raise ModalityError(
                f"model expects {self.n_channels} channels, got {w.n_channels} ({w.id!r})"
            )
        if w.sample_rate_hz != self.sample_rate_hz:
            raise ModalityError(
                f"model expects {self.sample_rate_hz} Hz, got {w.sample_rate_hz} Hz ({w.id!r})"
            )

    def preprocess(self, waveforms: Sequence[Waveform]) -> list:
        coeffs = self._filter()
        out = []
        for w in waveforms:
            self.check_modality(w)
            out.append(self.preprocessing.apply(w, coeffs))
        return out

    def scale(self, coords) -> np.ndarray:
        return (np.asarray(coords) - self.scaler_mean) / self.scaler_std

    def transform(self, waveforms: Sequence[Waveform], jobs: int = 1) -> np.ndarray:
        """Standardized embedding coordinates, shape (n, ndim)."""
        objs = self.preprocess(waveforms)
        coords = fastmap.embed_many(self.embedding, objs, self.distance, jobs)
        return self.scale(coords)

    def decision_function(self, waveforms: Sequence[Waveform], jobs: int = 1) -> np.ndarray:
        if len(waveforms) == 0:
            return np.zeros(0)
        return svm.decision_function(self.svm, self.transform(waveforms, jobs))


def _prepare(waveforms: Sequence[Waveform], pre: Preprocessing, sample_rate_hz: float) -> list:
    coeffs = pre.design(sample_rate_hz)
    return [pre.apply(w, coeffs) for w in waveforms]


def fit(train: LabeledWaveformSet, config: PipelineConfig | None = None) -> FastMapSVMModel:
    """Train a FastMapSVM model.

    Training samples are rounded to float32 first (the precision reference
    objects are stored with), so a saved and reloaded model scores inputs
    bit-identically to the in-memory one.
    """
    config = config or PipelineConfig()
    counts = [int(np.sum(train.labels == c)) for c in (0, 1)]
    if min(counts) < config.ndim:
        raise fastmap.InsufficientDataError(
            f"need at least {config.ndim} objects per class, have {counts}"
        )
    raw = [w.as_float32() for w in train.waveforms]
    objs = _prepare(raw, config.preprocessing, train.sample_rate_hz)
    distance = get_distance(config.distance_name)

    emb, coords = fastmap.fit_embedding(
        objs,
        train.labels,
        distance,
        config.ndim,
        seed=config.seed,
        epsilon=config.epsilon,
        swap_rounds=config.swap_rounds,
        jobs=config.jobs,
    )
    if emb.effective_ndim == 0:
        raise ValueError("degenerate embedding: all pivot distances are zero")
    mean = coords.mean(axis=0)
    std = coords.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    X = (coords - mean) / std
    y = np.where(train.labels == 1, 1, -1)

    gs_config = svm.GridSearchConfig(
        C_grid=tuple(config.C_grid),
        gamma_grid=tuple(config.gamma_grid),
        folds=config.folds,
        seed=config.seed,
        scoring=config.scoring,
    )
    if len(config.C_grid) == 1 and (config.kernel == "linear" or len(config.gamma_grid) == 1):
        best_C, best_gamma, scores = config.C_grid[0], config.gamma_grid[0], {}
    else:
        result = svm.grid_search(X, y, gs_config, config.kernel)
        best_C, best_gamma, scores = result.best_C, result.best_gamma, result.scores
    if config.kernel == "rbf":
        spec = svm.KernelSpec("rbf", svm.resolve_gamma(best_gamma, X))
    else:
        spec = svm.KernelSpec("linear")
    model_svm = svm.train_svm(X, y, best_C, spec)
    log.info("trained SVM: C=%g gamma=%s, %d support vectors", best_C, best_gamma, len(model_svm.support))

    echo = config.to_dict()
    echo["selected_C"] = float(best_C)
    echo["selected_gamma"] = best_gamma if best_gamma in ("scale", None) else float(best_gamma)
    echo["grid_scores"] = [
        {"C": c, "gamma": g, "score": s} for (c, g), s in sorted(scores.items(), key=lambda kv: (kv[0][0], str(kv[0][1])))
    ]
    echo["label_map"] = {"0": -1, "1": 1}
    return FastMapSVMModel(
        embedding=emb,
        raw_references=[raw[i] for i in emb.reference_index],
        scaler_mean=mean,
        scaler_std=std,
        svm=model_svm,
        class_names=train.class_names,
        preprocessing=config.preprocessing,
        config=echo,
        sample_rate_hz=train.sample_rate_hz,
        n_channels=train.n_channels,
        distance=distance,
    )


def predict(model: FastMapSVMModel, objects: Sequence[Waveform], jobs: int = 1) -> list:
    """``(label, score)`` per object; label 1 when the score is positive."""
    scores = model.decision_function(list(objects), jobs)
    return [(int(s > 0), float(s)) for s in scores]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _floats(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def _model_dict(model: FastMapSVMModel) -> dict:
    emb, sv = model.embedding, model.svm
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "class_names": list(model.class_names),
        "sample_rate_hz": model.sample_rate_hz,
        "n_channels": model.n_channels,
        "preprocessing": model.preprocessing.to_dict(),
        "config": model.config,
        "embedding": {
            "ndim": emb.ndim,
            "effective_ndim": emb.effective_ndim,
            "distance_name": emb.distance_name,
            "d_ab": _floats(emb.d_ab),
            "pivot_coords": [_floats(r) for r in emb.pivot_coords],
            "reference_labels": [int(v) for v in emb.reference_labels],
            "reference_index": [int(v) for v in emb.reference_index],
        },
        "scaler": {"mean": _floats(model.scaler_mean), "std": _floats(model.scaler_std)},
        "svm": {
            "kernel": model.svm.kernel.kind,
            "gamma": sv.kernel.gamma,
            "C": sv.C,
            "bias": sv.bias,
            "dual_coefs": _floats(sv.dual_coefs),
            "support_vectors": [_floats(r) for r in sv.support_vectors],
            "support": [int(v) for v in sv.support],
            "n_iter": sv.n_iter,
            "converged": sv.converged,
        },
    }


def save_model(model: FastMapSVMModel, path) -> None:
    """Write ``model.json`` and the raw reference waveforms under ``refs/``."""
    refs_labels = model.embedding.reference_labels

    def build(tmp: Path) -> None:
        refdir = tmp / REFS_DIR
        refdir.mkdir()
        entries = write_wfs_items(refdir, model.raw_references, refs_labels)
        dump_json(
            {
                "format_version": 1,
                "sample_rate_hz": model.sample_rate_hz,
                "n_channels": model.n_channels,
                "dtype": "f32le",
                "class_names": list(model.class_names),
                "items": entries,
            },
            refdir / "manifest.json",
        )
        dump_json(_model_dict(model), tmp / MODEL_FILE)

    replace_directory(Path(path), build)


def load_model(path) -> FastMapSVMModel:
    path = Path(path)
    mfile = path / MODEL_FILE
    if not mfile.is_file():
        raise ModelFormatError(f"missing {mfile}")
    try:
        d = json.loads(mfile.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format_version {d.get('format_version')!r} "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    try:
        raw_refs, _ = read_wfs_items(path / REFS_DIR, read_manifest(path / REFS_DIR))
        pre = Preprocessing.from_dict(d["preprocessing"])
        rate = float(d["sample_rate_hz"])
        e, s = d["embedding"], d["svm"]
        ndim = int(e["ndim"])
        emb = fastmap.EmbeddingModel(
            ndim=ndim,
            references=_prepare(raw_refs, pre, rate),
            reference_labels=np.asarray(e["reference_labels"], dtype=np.int64),
            reference_index=np.asarray(e["reference_index"], dtype=np.int64),
            pivot_coords=np.asarray(e["pivot_coords"], dtype=np.float64).reshape(-1, ndim),
            d_ab=np.asarray(e["d_ab"], dtype=np.float64),
            distance_name=e["distance_name"],
            effective_ndim=int(e["effective_ndim"]),
        )
        if len(emb.references) != 2 * emb.effective_ndim:
            raise ModelFormatError("reference count does not match the embedding dimension")
        kernel = svm.KernelSpec(s["kernel"], s["gamma"])
        model_svm = svm.SVMModel(
            support_vectors=np.asarray(s["support_vectors"], dtype=np.float64).reshape(-1, ndim),
            dual_coefs=np.asarray(s["dual_coefs"], dtype=np.float64),
            bias=float(s["bias"]),
            kernel=kernel,
            C=float(s["C"]),
            support=np.asarray(s["support"], dtype=np.int64),
            n_iter=int(s["n_iter"]),
            converged=bool(s["converged"]),
        )
        return FastMapSVMModel(
            embedding=emb,
            raw_references=raw_refs,
            scaler_mean=np.asarray(d["scaler"]["mean"], dtype=np.float64),
            scaler_std=np.asarray(d["scaler"]["std"], dtype=np.float64),
            svm=model_svm,
            class_names=tuple(d["class_names"]),
            preprocessing=pre,
            config=d["config"],
            sample_rate_hz=rate,
            n_channels=int(d["n_channels"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model payload: {exc}") from None
