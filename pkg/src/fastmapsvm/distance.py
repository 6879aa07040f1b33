"""Pairwise distance functions and the name registry used by models and the CLI.

A distance is any callable ``d(a, b) -> float`` that is pure, non-negative and
zero on identical objects. The normalized cross-correlation distance is the
one used for waveforms; Euclidean and edit distance cover vectors and strings.
"""
from __future__ import annotations

import threading
from typing import Callable

import numpy as np

from .waveform_io import Waveform

# Below this many multiply-adds the direct sum beats the FFT.
DIRECT_THRESHOLD = 4096


def lag_offset(n_i: int, n_j: int) -> int:
    """Alignment offset between the longer trace (length n_i) and the shorter (n_j).

    Lag ``tau`` correlates ``O_i[m]`` against ``O_j[m + offset - tau]``.
    """
    return (n_j - n_j % 2) // 2 - (n_i % 2) * (1 - n_j % 2)


def _as_channels(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.data
    a = np.asarray(x, dtype=np.float64)
    return a[np.newaxis, :] if a.ndim == 1 else a


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _raw_lags_direct(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Channel-wise sums ``sum_m a[m] * b[m - s]`` for s = tau - offset, tau in [0, n_a)."""
    n_i, n_j = a.shape[-1], b.shape[-1]
    off = lag_offset(n_i, n_j)
    out = np.empty(a.shape[:-1] + (n_i,))
    for c in range(a.shape[0]):
        # np.correlate 'full' index k corresponds to shift s = k - (n_j - 1)
        full = np.correlate(a[c], b[c], mode="full")
        out[c] = full[n_j - 1 - off : n_j - 1 - off + n_i]
    return out


def _raw_lags_fft(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted channel sum of the lag sums, computed with one inverse FFT."""
    n_i, n_j = a.shape[-1], b.shape[-1]
    off = lag_offset(n_i, n_j)
    nfft = _next_pow2(n_i + n_j - 1)
    spec = np.fft.rfft(a, nfft, axis=-1) * np.conj(np.fft.rfft(b, nfft, axis=-1))
    r = np.fft.irfft((weights[:, None] * spec).sum(axis=0), nfft)
    # r[s mod nfft] holds shift s
    shifts = np.arange(n_i) - off
    return r[shifts % nfft]


def _channel_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``1 / (sigma_i * sigma_j * n_i)`` per channel, 0 for dead channels."""
    s = a.std(axis=-1) * b.std(axis=-1)
    w = np.zeros_like(s)
    live = s > 0
    w[live] = 1.0 / (s[live] * a.shape[-1])
    return w


def ncc(o_i, o_j, method: str = "auto") -> np.ndarray:
    """Normalized cross-correlation of two zero-mean single-channel traces.

    Parameters
    ----------
    o_i, o_j : array_like, 1-D
        ``len(o_i) >= len(o_j) >= 2``.
    method : {"auto", "fft", "direct"}

    Returns
    -------
    ndarray, shape (len(o_i),)
        Correlation per lag, each lag sum divided by ``sigma_i * sigma_j * n_i``
        so values lie in [-1, 1]. All zeros if either trace is constant.
    """
    a = np.asarray(o_i, dtype=np.float64)
    b = np.asarray(o_j, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("ncc expects single-channel (1-D) traces")
    return _ncc_channels(a[None], b[None], method)[0]


def _ncc_channels(a: np.ndarray, b: np.ndarray, method: str) -> np.ndarray:
    n_i, n_j = a.shape[-1], b.shape[-1]
    if n_j < 2:
        raise ValueError("traces need at least 2 samples")
    if n_i < n_j:
        raise ValueError("first trace must be at least as long as the second")
    w = _channel_weights(a, b)
    if method == "auto":
        method = "direct" if n_i * n_j <= DIRECT_THRESHOLD else "fft"
    if method == "direct":
        return _raw_lags_direct(a, b) * w[:, None]
    if method == "fft":
        return np.stack([_raw_lags_fft(a[c : c + 1], b[c : c + 1], w[c : c + 1]) for c in range(a.shape[0])])
    raise ValueError(f"unknown method {method!r}")


def ncc_summed(o_i, o_j, method: str = "auto") -> np.ndarray:
    """Channel-summed NCC trace of two L-channel objects (longer one first)."""
    a, b = _as_channels(o_i), _as_channels(o_j)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"channel count mismatch: {a.shape[0]} vs {b.shape[0]}")
    n_i, n_j = a.shape[-1], b.shape[-1]
    if n_j < 2 or n_i < n_j:
        raise ValueError("first object must be at least as long as the second, both >= 2 samples")
    if method == "auto":
        method = "direct" if n_i * n_j <= DIRECT_THRESHOLD else "fft"
    if method == "fft":
        return _raw_lags_fft(a, b, _channel_weights(a, b))
    return _ncc_channels(a, b, method).sum(axis=0)


def _ordered(a: np.ndarray, b: np.ndarray) -> tuple:
    # Longer first. Equal lengths get an order from std-normalized content, so
    # d(a, b) == d(b, a) bit for bit and rescaling an argument cannot flip it.
    if a.shape[-1] != b.shape[-1]:
        return (a, b) if a.shape[-1] > b.shape[-1] else (b, a)
    diff = (_normalized(a) - _normalized(b)).ravel()
    # First clear difference decides; rounding noise from rescaling stays below the tolerance.
    idx = np.flatnonzero(np.abs(diff) > 1e-9)
    if len(idx):
        return (a, b) if diff[idx[0]] < 0 else (b, a)
    return (a, b) if a.tobytes() <= b.tobytes() else (b, a)


def _normalized(x: np.ndarray) -> np.ndarray:
    s = x.std(axis=-1, keepdims=True)
    return x / np.where(s > 0, s, 1.0)


def ncc_distance(o_i, o_j, method: str = "auto") -> float:
    """``1 - max_tau |sum_l ncc_l[tau]| / L`` for two L-channel objects.

    Channels are expected to be demeaned. A shared lag is used across
    channels. The result is clamped into [0, 1].
    """
    a, b = _as_channels(o_i), _as_channels(o_j)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"channel count mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape == b.shape and np.array_equal(a, b) and np.any(a.std(axis=-1) > 0):
        return 0.0
    a, b = _ordered(a, b)
    trace = ncc_summed(a, b, method)
    d = 1.0 - float(np.max(np.abs(trace))) / a.shape[0]
    return min(1.0, max(0.0, d))


def ncc_distance_1c(o_i, o_j, method: str = "auto") -> float:
    """Single-channel case of :func:`ncc_distance`."""
    a = np.asarray(o_i, dtype=np.float64)
    b = np.asarray(o_j, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("expected single-channel traces")
    return ncc_distance(a, b, method)


def euclidean_distance(x, y) -> float:
    """L2 norm of ``x - y``. Waveforms are compared sample by sample."""
    a = _as_channels(x).ravel() if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64).ravel()
    b = _as_channels(y).ravel() if isinstance(y, Waveform) else np.asarray(y, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def edit_distance(s, t) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(s) < len(t):
        s, t = t, s
    prev = list(range(len(t) + 1))
    for i, cs in enumerate(s, 1):
        cur = [i]
        for j, ct in enumerate(t, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (cs != ct)))
        prev = cur
    return prev[-1]


REGISTRY: dict[str, Callable] = {
    "ncc": ncc_distance,
    "euclidean": euclidean_distance,
    "edit": edit_distance,
}


def get_distance(name: str) -> Callable:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown distance {name!r}; choose from {sorted(REGISTRY)}") from None


def distance_name(fn) -> str | None:
    """Registry key of ``fn`` (unwrapping counters), or None if unregistered."""
    fn = getattr(fn, "inner", fn)
    for name, f in REGISTRY.items():
        if f is fn:
            return name
    return getattr(fn, "name", None)


class CountingDistance:
    """Wraps a distance and counts evaluations; safe to share across threads."""

    def __init__(self, inner: Callable):
        self.inner = inner
        self.count = 0
        self._lock = threading.Lock()

    def __call__(self, a, b):
        with self._lock:
            self.count += 1
        return self.inner(a, b)

    def reset(self) -> None:
        with self._lock:
            self.count = 0
