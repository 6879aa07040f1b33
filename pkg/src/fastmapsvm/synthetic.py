"""Synthetic 3-channel "seismograms": damped-sine events in colored noise.

Spectral shapes follow what is typical of local earthquake records after a
1-20 Hz bandpass: the event spectrum is broad and roughly flat across the
band (several damped modes), while background noise concentrates energy in
resonances near both band edges (microseism-like near 1 Hz, cultural-like
near 18 Hz). All samples are rounded to float32 so generated sets survive a
WFS round trip unchanged.
"""
from __future__ import annotations

import numpy as np
import scipy.signal

from .waveform_io import LabeledWaveformSet, Waveform

SAMPLE_RATE_HZ = 100.0
N_CHANNELS = 3
NOISE_PEAKS_HZ = (1.0, 18.0)
NOISE_PEAK_RADIUS = 0.995
EVENT_MODES_HZ = (2.0, 4.0, 7.0, 11.0, 15.0)


def _resonator(rng, freq_hz, radius, n_channels, n_samples, sample_rate_hz):
    w = 2 * np.pi * freq_hz / sample_rate_hz
    burn = 400
    white = rng.standard_normal((n_channels, n_samples + burn))
    x = scipy.signal.lfilter([1.0], [1.0, -2 * radius * np.cos(w), radius**2], white, axis=-1)
    x = x[:, burn:]
    return x / x.std(axis=-1, keepdims=True)


def colored_noise(rng: np.random.Generator, n_channels: int, n_samples: int,
                  sample_rate_hz: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """Unit-variance background: two band-edge resonances plus a weak white floor."""
    x = sum(_resonator(rng, f, NOISE_PEAK_RADIUS, n_channels, n_samples, sample_rate_hz)
            for f in NOISE_PEAKS_HZ)
    x = x + 0.2 * rng.standard_normal((n_channels, n_samples))
    return x / x.std(axis=-1, keepdims=True)


def damped_sine(rng: np.random.Generator, n_channels: int, sample_rate_hz: float, duration_s: float) -> np.ndarray:
    """One event: a sum of damped sines spanning the passband.

    Events share a source family: mode frequencies, decays and the
    per-channel radiation pattern scatter mildly around common values. Peak
    amplitude is about 1; the event starts at sample 0 with a 0.1 s ramp.
    """
    t = np.arange(int(round(duration_s * sample_rate_hz))) / sample_rate_hz
    pattern = np.linspace(1.0, 0.6, n_channels) * rng.uniform(0.85, 1.15, n_channels)
    base_phase = np.linspace(0.0, 0.5 * np.pi, n_channels)
    out = np.zeros((n_channels, len(t)))
    for f0 in EVENT_MODES_HZ:
        f = f0 * rng.uniform(0.95, 1.05)
        decay = rng.uniform(0.8, 1.2) * (1.0 + 2.0 / f0)
        ph = base_phase + rng.uniform(-0.3, 0.3, n_channels)
        env = np.exp(-t / decay)
        out += env[None, :] * np.sin(2 * np.pi * f * t[None, :] + ph[:, None])
    out *= np.minimum(1.0, t / 0.1)[None, :]
    out = pattern[:, None] * out
    return out / np.abs(out).max()


def make_event_waveform(rng, duration_s=8.0, snr=8.0, onset_range_s=(1.0, 3.0), id="",
                        sample_rate_hz=SAMPLE_RATE_HZ, n_channels=N_CHANNELS) -> Waveform:
    n = int(round(duration_s * sample_rate_hz))
    data = colored_noise(rng, n_channels, n)
    onset = int(round(rng.uniform(*onset_range_s) * sample_rate_hz))
    ev = damped_sine(rng, n_channels, sample_rate_hz, duration_s - onset / sample_rate_hz)
    data[:, onset:onset + ev.shape[1]] += snr * ev
    return Waveform(data.astype(np.float32), sample_rate_hz, id)


def make_noise_waveform(rng, duration_s=8.0, id="", sample_rate_hz=SAMPLE_RATE_HZ,
                        n_channels=N_CHANNELS) -> Waveform:
    n = int(round(duration_s * sample_rate_hz))
    return Waveform(colored_noise(rng, n_channels, n).astype(np.float32), sample_rate_hz, id)


def make_dataset(n_events: int, n_noise: int, seed: int = 0, duration_s: float = 8.0,
                 snr: float = 8.0, prefix: str = "syn") -> LabeledWaveformSet:
    """Labelled set with noise as class 0 and events as class 1, interleaved."""
    rng = np.random.default_rng(seed)
    waveforms, labels = [], []
    order = np.array([1] * n_events + [0] * n_noise)
    order = order[rng.permutation(len(order))]
    for i, label in enumerate(order):
        if label:
            w = make_event_waveform(rng, duration_s, snr, id=f"{prefix}{i:05d}")
        else:
            w = make_noise_waveform(rng, duration_s, id=f"{prefix}{i:05d}")
        waveforms.append(w)
        labels.append(int(label))
    return LabeledWaveformSet(waveforms, np.array(labels), ("noise", "earthquake"),
                              SAMPLE_RATE_HZ, N_CHANNELS)


def make_stream(duration_s: float, event_times_s=(), seed: int = 0, snr: float = 8.0,
                event_duration_s: float = 5.0, id: str = "stream") -> Waveform:
    """Continuous noise with events starting at ``event_times_s``."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE_HZ))
    data = colored_noise(rng, N_CHANNELS, n)
    for t0 in event_times_s:
        ev = snr * damped_sine(rng, N_CHANNELS, SAMPLE_RATE_HZ, event_duration_s)
        i0 = int(round(t0 * SAMPLE_RATE_HZ))
        i1 = min(n, i0 + ev.shape[1])
        data[:, i0:i1] += ev[:, : i1 - i0]
    return Waveform(data.astype(np.float32), SAMPLE_RATE_HZ, id)
