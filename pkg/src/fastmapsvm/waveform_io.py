"""
Waveform containers, the WFS dataset format, and signal preprocessing.

A WFS dataset is a directory holding ``manifest.json`` plus one raw
little-endian float32 file per item, channel-major.
"""
from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import scipy.signal

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
DTYPE = "f32le"


class WFSFormatError(ValueError):
    """Raised when a WFS directory is missing, malformed, or inconsistent."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Waveform:
    """An L-channel, fixed-rate, finite real signal.

    Parameters
    ----------
    data : array_like, shape (L, n) or (n,)
        Samples. A 1-D input is treated as a single channel.
    sample_rate_hz : float
    id : str
    """

    data: np.ndarray
    sample_rate_hz: float
    id: str = ""

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise ValueError("waveform data must be 1-D or 2-D (channels, samples)")
        if data.shape[0] < 1:
            raise ValueError("waveform needs at least one channel")
        if data.shape[1] < 2:
            raise ValueError("waveform needs at least 2 samples per channel")
        if not np.all(np.isfinite(data)):
            raise ValueError("waveform samples must be finite")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "id", str(self.id))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def replace(self, data=None, id=None) -> "Waveform":
        return Waveform(
            self.data if data is None else data,
            self.sample_rate_hz,
            self.id if id is None else id,
        )

    def as_float32(self) -> "Waveform":
        """Round samples to float32 precision (what WFS stores)."""
        return self.replace(self.data.astype(np.float32).astype(np.float64))

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (
            self.id == other.id
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


@dataclass(eq=False)
class LabeledWaveformSet:
    """Binary-labelled collection of waveforms sharing rate and channel count.

    ``sample_rate_hz`` and ``n_channels`` are inferred from the items; an
    empty set must be given them explicitly.
    """

    waveforms: list
    labels: np.ndarray
    class_names: tuple = ("noise", "earthquake")
    sample_rate_hz: float | None = None
    n_channels: int | None = None

    def __post_init__(self):
        self.waveforms = list(self.waveforms)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.class_names = tuple(str(c) for c in self.class_names)
        if len(self.class_names) != 2:
            raise ValueError("binary labels required: exactly two class names")
        if len(self.labels) != len(self.waveforms):
            raise ValueError("one label per waveform required")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise ValueError("binary labels required: labels must be 0 or 1")
        if self.waveforms:
            rates = {w.sample_rate_hz for w in self.waveforms}
            chans = {w.n_channels for w in self.waveforms}
            if len(rates) != 1:
                raise ValueError("inconsistent sample rates in set")
            if len(chans) != 1:
                raise ValueError("inconsistent channel counts in set")
            rate, nch = rates.pop(), chans.pop()
            if self.sample_rate_hz is not None and float(self.sample_rate_hz) != rate:
                raise ValueError("sample_rate_hz disagrees with items")
            if self.n_channels is not None and int(self.n_channels) != nch:
                raise ValueError("n_channels disagrees with items")
            self.sample_rate_hz, self.n_channels = rate, nch
        elif self.sample_rate_hz is None or self.n_channels is None:
            raise ValueError("an empty set needs explicit sample_rate_hz and n_channels")
        self.sample_rate_hz = float(self.sample_rate_hz)
        self.n_channels = int(self.n_channels)

    def __len__(self) -> int:
        return len(self.waveforms)

    def __iter__(self) -> Iterator[tuple]:
        return iter(zip(self.waveforms, self.labels.tolist()))

    @property
    def items(self) -> list:
        return list(self)

    @property
    def ids(self) -> list:
        return [w.id for w in self.waveforms]

    def subset(self, indices: Sequence[int]) -> "LabeledWaveformSet":
        indices = [int(i) for i in indices]
        return LabeledWaveformSet(
            [self.waveforms[i] for i in indices],
            self.labels[indices] if indices else np.zeros(0, dtype=np.int64),
            self.class_names,
            self.sample_rate_hz,
            self.n_channels,
        )

    def __eq__(self, other):
        if not isinstance(other, LabeledWaveformSet):
            return NotImplemented
        return (
            self.class_names == other.class_names
            and self.sample_rate_hz == other.sample_rate_hz
            and self.n_channels == other.n_channels
            and np.array_equal(self.labels, other.labels)
            and all(a == b for a, b in zip(self.waveforms, other.waveforms))
            and len(self) == len(other)
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# WFS persistence
# ---------------------------------------------------------------------------

def _item_filename(index: int) -> str:
    return f"{index:06d}.f32"


def _write_item(path: Path, w: Waveform) -> None:
    path.write_bytes(w.data.astype("<f4").tobytes(order="C"))


def _read_item(path: Path, n_channels: int, n_samples: int) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise WFSFormatError(f"missing payload file {path.name}") from None
    expected = 4 * n_channels * n_samples
    if len(raw) != expected:
        raise WFSFormatError(
            f"payload length mismatch for {path.name}: "
            f"expected {expected} bytes, found {len(raw)}"
        )
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(n_channels, n_samples)


def write_wfs_items(directory: Path, waveforms: Sequence[Waveform], labels) -> list:
    """Write payload files and return the manifest ``items`` entries."""
    entries = []
    for i, (w, label) in enumerate(zip(waveforms, labels)):
        name = _item_filename(i)
        _write_item(directory / name, w)
        entries.append(
            {"id": w.id, "label": int(label), "file": name, "n_samples": w.n_samples}
        )
    return entries


def _manifest_dict(ds: LabeledWaveformSet, entries: list) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "sample_rate_hz": ds.sample_rate_hz,
        "n_channels": ds.n_channels,
        "dtype": DTYPE,
        "class_names": list(ds.class_names),
        "items": entries,
    }


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def replace_directory(target: Path, build) -> None:
    """Populate a fresh temp directory with ``build(tmp)`` then swap it in.

    An existing ``target`` is removed only once the new contents are
    complete, so a failure never leaves a half-written directory behind.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    if target.exists() and not target.is_dir():
        raise FileExistsError(f"{target} exists and is not a directory")
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        build(tmp)
        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def save_dataset(ds: LabeledWaveformSet, path) -> None:
    """Write ``ds`` as a WFS directory, replacing anything already at ``path``.

    Samples are stored as float32; a set whose samples are already
    float32-representable round-trips bit-exactly.
    """

    def build(tmp: Path) -> None:
        entries = write_wfs_items(tmp, ds.waveforms, ds.labels)
        dump_json(_manifest_dict(ds, entries), tmp / MANIFEST)

    replace_directory(Path(path), build)


def read_manifest(path) -> dict:
    path = Path(path)
    mpath = path / MANIFEST
    if not mpath.is_file():
        raise WFSFormatError(f"missing manifest: {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise WFSFormatError(f"corrupt manifest: {exc}") from None
    for key in ("format_version", "sample_rate_hz", "n_channels", "dtype", "class_names", "items"):
        if key not in manifest:
            raise WFSFormatError(f"manifest missing field {key!r}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise WFSFormatError(f"unsupported format_version {manifest['format_version']!r}")
    if manifest["dtype"] != DTYPE:
        raise WFSFormatError(f"unsupported dtype {manifest['dtype']!r}")
    return manifest


def read_wfs_items(path: Path, manifest: dict) -> tuple[list, list]:
    rate = float(manifest["sample_rate_hz"])
    nch = int(manifest["n_channels"])
    waveforms, labels = [], []
    for entry in manifest["items"]:
        data = _read_item(path / entry["file"], nch, int(entry["n_samples"]))
        waveforms.append(Waveform(data, rate, entry["id"]))
        labels.append(entry["label"])
    return waveforms, labels


def load_dataset(path) -> LabeledWaveformSet:
    """Read a WFS directory written by :func:`save_dataset`."""
    path = Path(path)
    manifest = read_manifest(path)
    labels_seen = {e.get("label") for e in manifest["items"]}
    if len(manifest["class_names"]) != 2 or not labels_seen <= {0, 1}:
        raise WFSFormatError("binary labels required")
    waveforms, labels = read_wfs_items(path, manifest)
    try:
        return LabeledWaveformSet(
            waveforms,
            np.asarray(labels, dtype=np.int64),
            tuple(manifest["class_names"]),
            manifest["sample_rate_hz"],
            manifest["n_channels"],
        )
    except ValueError as exc:
        raise WFSFormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilterCoefficients:
    """Cascaded biquads, one row ``[b0, b1, b2, 1, a1, a2]`` per section."""

    sos: np.ndarray
    low_hz: float
    high_hz: float
    poles: int
    sample_rate_hz: float

    @property
    def order(self) -> int:
        return 2 * self.sos.shape[0]

    @property
    def sections(self) -> list:
        """Sections as ``(b0, b1, b2, a1, a2)`` tuples."""
        return [(r[0], r[1], r[2], r[4], r[5]) for r in self.sos.tolist()]


def design_butterworth_bandpass(low_hz, high_hz, sample_rate_hz, poles=4) -> FilterCoefficients:
    """Digital Butterworth bandpass as second-order sections.

    ``poles`` is the total pole count of the digital filter, so the analog
    lowpass prototype has order ``poles // 2``. Corners are pre-warped before
    the bilinear transform, so the -3 dB points land on ``low_hz`` and
    ``high_hz`` exactly.
    """
    fs = float(sample_rate_hz)
    if not (0 < low_hz < high_hz < fs / 2):
        raise ValueError(
            f"corner frequencies must satisfy 0 < low < high < Nyquist ({fs / 2} Hz)"
        )
    if poles < 2 or poles % 2:
        raise ValueError("poles must be even and >= 2")
    order = poles // 2
    fs2 = 2.0 * fs
    w_lo = fs2 * math.tan(math.pi * low_hz / fs)
    w_hi = fs2 * math.tan(math.pi * high_hz / fs)
    bw = w_hi - w_lo
    w0_sq = w_lo * w_hi

    # Analog prototype poles in the upper half plane plus the real pole for odd order.
    proto = [
        np.exp(1j * math.pi * (2 * k + order + 1) / (2 * order))
        for k in range(order)
    ]
    upper = [p for p in proto if p.imag > 1e-12]
    real = [p for p in proto if abs(p.imag) <= 1e-12]

    def lp2bp(p):
        half = p * bw / 2
        root = np.sqrt(half * half - w0_sq + 0j)
        return half + root, half - root

    def bilinear(s):
        return (fs2 + s) / (fs2 - s)

    # Each biquad carries one zero at z=1 and one at z=-1.
    pole_pairs = []
    for p in upper:
        for s in lp2bp(p):
            z = bilinear(s)
            pole_pairs.append((z, np.conj(z)))
    for p in real:
        s1, s2 = lp2bp(p)
        pole_pairs.append((bilinear(s1), bilinear(s2)))

    # Analog gain bw**order over `order` zeros at s=0; bilinear gain correction.
    analog_poles = []
    for p in upper:
        for s in lp2bp(p):
            analog_poles.extend([s, np.conj(s)])
    for p in real:
        analog_poles.extend(lp2bp(p))
    gain = bw**order * fs2**order / np.prod([fs2 - s for s in analog_poles])
    gain = float(np.real(gain))

    sos = np.zeros((len(pole_pairs), 6))
    for row, (z1, z2) in zip(sos, pole_pairs):
        row[:3] = (1.0, 0.0, -1.0)
        row[3] = 1.0
        row[4] = float(np.real(-(z1 + z2)))
        row[5] = float(np.real(z1 * z2))
    sos[0, :3] *= gain

    for z1, z2 in pole_pairs:
        if abs(z1) >= 1 or abs(z2) >= 1:
            raise ValueError("filter design produced an unstable section")
    return FilterCoefficients(_readonly(sos), float(low_hz), float(high_hz), int(poles), fs)


def frequency_response(coeffs: FilterCoefficients, freqs_hz) -> np.ndarray:
    """Complex response of the cascade at the given frequencies."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    zinv = np.exp(-2j * np.pi * f / coeffs.sample_rate_hz)
    h = np.ones_like(zinv)
    for b0, b1, b2, _, a1, a2 in coeffs.sos:
        h *= (b0 + b1 * zinv + b2 * zinv**2) / (1 + a1 * zinv + a2 * zinv**2)
    return h


def _odd_extend(x: np.ndarray, pad: int) -> np.ndarray:
    left = 2 * x[..., :1] - x[..., pad:0:-1]
    right = 2 * x[..., -1:] - x[..., -2:-pad - 2:-1]
    return np.concatenate([left, x, right], axis=-1)


def filtfilt(coeffs: FilterCoefficients, w: Waveform) -> Waveform:
    """Zero-phase forward-backward filtering of every channel.

    The signal is extended by odd reflection of ``3 * order`` samples at each
    end; each pass starts from the steady-state section response to the
    first sample.
    """
    if w.sample_rate_hz != coeffs.sample_rate_hz:
        raise ValueError("filter designed for a different sample rate")
    pad = 3 * coeffs.order
    if w.n_samples <= pad:
        raise ValueError(
            f"waveform too short for filtering: need more than {pad} samples, got {w.n_samples}"
        )
    sos = np.array(coeffs.sos)
    zi = scipy.signal.sosfilt_zi(sos)  # (sections, 2)
    ext = _odd_extend(w.data, pad)
    x0 = ext[:, :1]
    y, _ = scipy.signal.sosfilt(sos, ext, axis=-1, zi=zi[:, None, :] * x0[None])
    y = y[:, ::-1]
    y0 = y[:, :1]
    y, _ = scipy.signal.sosfilt(sos, y, axis=-1, zi=zi[:, None, :] * y0[None])
    y = y[:, ::-1]
    return w.replace(np.ascontiguousarray(y[:, pad:-pad]))


def demean(w: Waveform) -> Waveform:
    return w.replace(w.data - w.data.mean(axis=1, keepdims=True))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def circular_shift(w: Waveform, offset_s: float) -> Waveform:
    """Rotate all channels; positive offsets move content later in time."""
    if abs(offset_s) > w.duration_s:
        raise ValueError(f"offset {offset_s} s exceeds waveform duration {w.duration_s} s")
    shift = _round_half_up(offset_s * w.sample_rate_hz)
    if shift == 0:
        return w
    return w.replace(np.roll(w.data, shift, axis=1))


def add_gaussian_noise(w: Waveform, sigma: float, seed: int) -> Waveform:
    """Add zero-mean Gaussian noise whose std is ``sigma`` times each trace's std.

    The generator is ``numpy.random.default_rng(seed)``, so the output is a
    pure function of ``(w, sigma, seed)``.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return w
    rng = np.random.default_rng(seed)
    scale = sigma * w.data.std(axis=1, keepdims=True)
    noise = rng.standard_normal(w.data.shape)
    return w.replace(w.data + scale * noise)


@dataclass(frozen=True)
class Preprocessing:
    """Recorded preprocessing chain, replayed identically at predict time."""

    band: tuple | None = (1.0, 20.0)
    poles: int = 4
    demean: bool = True

    def to_dict(self) -> dict:
        return {
            "band": None if self.band is None else [float(b) for b in self.band],
            "poles": int(self.poles),
            "demean": bool(self.demean),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessing":
        band = d.get("band")
        return cls(None if band is None else tuple(float(b) for b in band), int(d["poles"]), bool(d["demean"]))

    def design(self, sample_rate_hz: float) -> FilterCoefficients | None:
        if self.band is None:
            return None
        return design_butterworth_bandpass(self.band[0], self.band[1], sample_rate_hz, self.poles)

    def apply(self, w: Waveform, coeffs: FilterCoefficients | None = None) -> Waveform:
        if self.band is not None:
            if coeffs is None:
                coeffs = self.design(w.sample_rate_hz)
            w = filtfilt(coeffs, demean(w) if self.demean else w)
        # ncc requires zero-mean channels; the bandpass output is only nearly so.
        if self.demean:
            w = demean(w)
        return w
