"""FastMap embedding of waveforms followed by SVM classification."""
from .distance import euclidean_distance, ncc_distance
from .fastmap import EmbeddingModel, embed, fit_embedding
from .pipeline import FastMapSVMModel, PipelineConfig, fit, load_model, predict, save_model
from .scanner import Detection, scan
from .waveform_io import LabeledWaveformSet, Waveform, load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "Detection",
    "EmbeddingModel",
    "FastMapSVMModel",
    "LabeledWaveformSet",
    "PipelineConfig",
    "Waveform",
    "embed",
    "euclidean_distance",
    "fit",
    "fit_embedding",
    "load_dataset",
    "load_model",
    "ncc_distance",
    "predict",
    "save_dataset",
    "save_model",
    "scan",
]
