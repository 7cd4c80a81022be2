"""Log-mel feature extraction.

A clip becomes a float32 array of shape (3, frames, 50):

  channel 0   49 log mel filter-bank energies plus per-frame log energy
              as band 50
  channel 1   delta (regression over a +/-2 frame window)
  channel 2   delta-delta (same regression applied to the deltas)

Analysis uses 25 ms frames (400 samples) with a 10 ms hop (160 samples), a
Hann window, and a 512-point DFT, so a 4.00 s clip yields exactly 400 frames
(the tail is reflection-padded). The mel scale is the HTK variant
mel = 2595*log10(1 + f/700); filters are triangles sampled at the DFT bin
frequencies, spanning 0-8000 Hz, without area normalization. Logs are
floored at 1e-10 so silence stays finite.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, AudioClip

FRAME_LEN = 400
HOP = 160
N_FFT = 512
N_BINS = N_FFT // 2 + 1
N_MEL = 49
N_BANDS = N_MEL + 1
F_MIN = 0.0
F_MAX = 8000.0
LOG_FLOOR = 1e-10
PATCH_FRAMES = 400
DELTA_WINDOW = 2

FEATURE_MAGIC = b"AEDF"
FEATURE_VERSION = 1


class FeatureError(Exception):
    pass


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_edge_frequencies(n_filters: int = N_MEL, f_min: float = F_MIN, f_max: float = F_MAX) -> np.ndarray:
    """The n_filters+2 Hz points (edges and centers) of the triangle bank."""
    mels = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_filters + 2)
    return mel_to_hz(mels)


def filterbank_from_edges(edges_hz: np.ndarray, n_bins: int = N_BINS, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular filters sampled at DFT bin frequencies.

    Row j rises linearly from edges_hz[j] to a peak at edges_hz[j+1] and
    falls to edges_hz[j+2].
    """
    n_filters = len(edges_hz) - 2
    bin_hz = np.arange(n_bins) * (sample_rate / N_FFT)
    fb = np.zeros((n_filters, n_bins))
    for j in range(n_filters):
        lo, center, hi = edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[j] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def mel_filterbank(n_filters: int = N_MEL) -> np.ndarray:
    return filterbank_from_edges(mel_edge_frequencies(n_filters))


def frame_spectra(clip) -> np.ndarray:
    """Magnitude spectra, one row per 10 ms hop: shape (ceil(n/160), 257)."""
    if isinstance(clip, AudioClip):
        if clip.sample_rate != SAMPLE_RATE:
            raise FeatureError(f"expected {SAMPLE_RATE} Hz clip, got {clip.sample_rate}")
        samples = clip.samples
    else:
        samples = np.asarray(clip, dtype=np.float64)
    n = len(samples)
    if n < FRAME_LEN:
        raise FeatureError(f"clip of {n} samples is shorter than one {FRAME_LEN}-sample frame")
    n_frames = -(-n // HOP)
    needed = (n_frames - 1) * HOP + FRAME_LEN
    if needed > n:
        samples = np.pad(samples, (0, needed - n), mode="reflect")
    window = np.hanning(FRAME_LEN)
    idx = np.arange(FRAME_LEN)[None, :] + HOP * np.arange(n_frames)[:, None]
    frames = samples[idx] * window
    return np.abs(np.fft.rfft(frames, n=N_FFT, axis=1))


def logmel_energy(spectra: np.ndarray, filterbank: np.ndarray | None = None) -> np.ndarray:
    """Apply the filter bank to the power spectrum and append log energy."""
    spectra = np.asarray(spectra, dtype=np.float64)
    if np.any(spectra < 0):
        raise FeatureError("spectra must be non-negative magnitudes")
    if filterbank is None:
        filterbank = mel_filterbank()
    power = spectra**2
    bands = power @ filterbank.T
    energy = power.sum(axis=1, keepdims=True)
    out = np.concatenate([bands, energy], axis=1)
    return np.log(np.maximum(out, LOG_FLOOR))


def deltas(static: np.ndarray, window: int = DELTA_WINDOW) -> np.ndarray:
    """Stack (static, delta, delta-delta) into a (3, frames, bands) array.

    d_t = sum_{n=1..W} n*(c_{t+n} - c_{t-n}) / (2*sum n^2), with edge frames
    replicated beyond the boundaries.
    """
    static = np.asarray(static, dtype=np.float64)
    n_frames = static.shape[0]
    if n_frames < 2 * window + 1:
        raise FeatureError(f"need at least {2 * window + 1} frames for deltas, got {n_frames}")

    def regression(x):
        denom = 2.0 * sum(k * k for k in range(1, window + 1))
        out = np.zeros_like(x)
        for k in range(1, window + 1):
            ahead = x[np.minimum(np.arange(n_frames) + k, n_frames - 1)]
            behind = x[np.maximum(np.arange(n_frames) - k, 0)]
            out += k * (ahead - behind)
        return out / denom

    d1 = regression(static)
    d2 = regression(d1)
    return np.stack([static, d1, d2])


def extract_features(clip, warp: float | None = None) -> np.ndarray:
    """Full pipeline clip -> float32 (3, frames, 50) feature map.

    `warp` selects a frequency-warped filterbank (see aedtk.augment) and is
    only used for augmented training entries.
    """
    if warp is None or warp == 1.0:
        fb = mel_filterbank()
    else:
        from .augment import vtlp_filterbank

        fb = vtlp_filterbank(warp)
    spectra = frame_spectra(clip)
    static = logmel_energy(spectra, fb)
    return deltas(static).astype(np.float32)


def crop_patch(feature_map: np.ndarray, start: int, length: int = PATCH_FRAMES) -> np.ndarray:
    """Frames [start, start+length); maps shorter than `length` are tiled
    from frame 0 (the start is ignored) instead of interpolated."""
    n_frames = feature_map.shape[1]
    if n_frames >= length:
        idx = (start + np.arange(length)) % n_frames
        return np.ascontiguousarray(feature_map[:, idx, :])
    reps = -(-length // n_frames)
    tiled = np.tile(feature_map, (1, reps, 1))
    return np.ascontiguousarray(tiled[:, :length, :])


def inference_patches(feature_map: np.ndarray, length: int = PATCH_FRAMES) -> np.ndarray:
    """All patches at a 50% shift: starts 0, length/2, ... while they fit.
    Short maps give a single tiled patch. Returns (n_patches, 3, length, bands)."""
    n_frames = feature_map.shape[1]
    step = max(1, length // 2)
    if n_frames < length:
        starts = [0]
    else:
        starts = list(range(0, n_frames - length + 1, step))
    return np.stack([crop_patch(feature_map, s, length) for s in starts])


def standardization_stats(feature_maps) -> tuple[np.ndarray, np.ndarray]:
    """Per (channel, band) mean and standard deviation over all frames."""
    count = 0
    total = None
    total_sq = None
    for fm in feature_maps:
        fm = np.asarray(fm, dtype=np.float64)
        s = fm.sum(axis=1)
        sq = (fm**2).sum(axis=1)
        total = s if total is None else total + s
        total_sq = sq if total_sq is None else total_sq + sq
        count += fm.shape[1]
    if count == 0:
        raise FeatureError("no frames to compute standardization statistics")
    mean = total / count
    var = np.maximum(total_sq / count - mean**2, 0.0)
    std = np.maximum(np.sqrt(var), 1e-8)
    return mean.astype(np.float32), std.astype(np.float32)


def standardize(feature_array: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Apply stats to a (3, T, bands) map or a (n, 3, T, bands) batch."""
    mean = np.asarray(mean, dtype=feature_array.dtype)
    std = np.asarray(std, dtype=feature_array.dtype)
    if feature_array.ndim == 3:
        return (feature_array - mean[:, None, :]) / std[:, None, :]
    return (feature_array - mean[None, :, None, :]) / std[None, :, None, :]


def write_feature_file(path, feature_map: np.ndarray) -> None:
    """Binary layout: b"AEDF", u16 version, u16 ndim, ndim*u32 dims
    (little-endian), then the float32 payload in row-major order."""
    arr = np.ascontiguousarray(feature_map, dtype="<f4")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<HH", FEATURE_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_feature_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise FeatureError(f"{path}: not a feature file (bad magic {magic!r})")
        version, ndim = struct.unpack("<HH", fh.read(4))
        if version != FEATURE_VERSION:
            raise FeatureError(f"{path}: unsupported feature version {version}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        payload = fh.read()
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected:
        raise FeatureError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
