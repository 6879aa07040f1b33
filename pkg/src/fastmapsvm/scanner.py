"""Sliding-window detection over a continuous multichannel stream."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


from .pipeline import FastMapSVMModel
from .waveform_io import Waveform

DEFAULT_WINDOW_S = 8.0
DEFAULT_STRIDE_S = 2.0


@dataclass(frozen=True)
class Detection:
    start_s: float
    end_s: float
    score: float
    window_count: int


@dataclass(frozen=True)
class WindowScore:
    start_s: float
    end_s: float
    score: float


def window_offsets(n_samples: int, sample_rate_hz: float, window_s: float, stride_s: float) -> list:
    """Start sample of every full window at 0, stride, 2*stride, ..."""
    n_win = int(round(window_s * sample_rate_hz))
    offsets = []
    k = 0
    while True:
        start = int(round(k * stride_s * sample_rate_hz))
        if start + n_win > n_samples:
            break
        offsets.append(start)
        k += 1
    return offsets


def score_windows(model: FastMapSVMModel, stream: Waveform, window_s: float = DEFAULT_WINDOW_S,
                  stride_s: float = DEFAULT_STRIDE_S, jobs: int = 1) -> list:
    """Decision score of every window, in time order."""
    if stride_s <= 0:
        raise ValueError("stride_s must be positive")
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    model.check_modality(stream)
    if window_s > stream.duration_s:
        raise ValueError(f"window ({window_s} s) longer than stream ({stream.duration_s} s)")
    fs = stream.sample_rate_hz
    n_win = int(round(window_s * fs))
    offsets = window_offsets(stream.n_samples, fs, window_s, stride_s)
    windows = [
        stream.replace(stream.data[:, o:o + n_win], id=f"{stream.id}@{o / fs:g}") for o in offsets
    ]
    scores = model.decision_function(windows, jobs)
    return [WindowScore(o / fs, (o + n_win) / fs, float(s)) for o, s in zip(offsets, scores)]


def merge_hits(hits: list, stride_s: float) -> list:
    """Merge time-ordered hits that overlap or are separated by less than ``stride_s``."""
    out: list = []
    for h in sorted(hits, key=lambda h: h.start_s):
        if out and h.start_s - out[-1].end_s < stride_s:
            last = out[-1]
            out[-1] = Detection(last.start_s, max(last.end_s, h.end_s),
                                max(last.score, h.score), last.window_count + 1)
        else:
            out.append(Detection(h.start_s, h.end_s, h.score, 1))
    return out


def detect(window_scores: list, threshold: float, stride_s: float) -> list:
    hits = [w for w in window_scores if w.score > threshold and w.score > 0]
    return merge_hits(hits, stride_s)


def scan(model: FastMapSVMModel, stream: Waveform, window_s: float = DEFAULT_WINDOW_S,
         stride_s: float = DEFAULT_STRIDE_S, threshold: float = 0.0, jobs: int = 1) -> list:
    """Detections in ``stream``, sorted and disjoint in time.

    A window is a raw hit when its decision score exceeds ``threshold`` and
    the model labels it positive.
    """
    return detect(score_windows(model, stream, window_s, stride_s, jobs), threshold, stride_s)


def write_detections_csv(detections: list, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_s", "end_s", "score", "window_count"])
        for d in detections:
            w.writerow([repr(d.start_s), repr(d.end_s), repr(d.score), d.window_count])
