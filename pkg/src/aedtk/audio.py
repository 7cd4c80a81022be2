"""Audio ingestion and preprocessing.

All clips are converted on ingestion to 16 kHz mono float arrays scaled to
[-1, 1]. Preprocessing (peak normalization, silence removal, segmentation)
operates on whole clips and is pure, so it can be parallelized across clips.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

SAMPLE_RATE = 16000

TRIM_FRAME_S = 0.025
DEFAULT_THRESHOLD_DB = -50.0
DEFAULT_MIN_GAP_S = 0.5
DEFAULT_MAX_LEN_S = 12.0
NORMALIZE_PEAK = 0.95


class AudioError(Exception):
    """Base class for audio ingestion/preprocessing failures."""


class UnsupportedFormatError(AudioError):
    """The file is a WAV container but not integer PCM."""


class EmptyClipError(AudioError):
    """An operation would produce (or received) a clip with no samples."""


@dataclass
class AudioClip:
    """Mono waveform at a known sample rate, with label and provenance."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    label: str | None = None
    source_id: str = ""
    split: str | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AudioError(f"clip samples must be 1-D, got shape {self.samples.shape}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        return replace(self, samples=np.asarray(samples, dtype=np.float64))


def _decode_pcm(raw: bytes, sampwidth: int) -> np.ndarray:
    """Decode little-endian PCM bytes to float64 in [-1, 1]."""
    if sampwidth == 1:
        # 8-bit WAV is unsigned
        return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if sampwidth == 2:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if sampwidth == 3:
        octets = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        padded = np.zeros((octets.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = octets
        return (padded.view("<i4")[:, 0] >> 8).astype(np.float64) / 8388608.0
    if sampwidth == 4:
        return np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    raise UnsupportedFormatError(f"unsupported PCM sample width: {sampwidth} bytes")


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a PCM WAV file. Returns (samples, rate); samples is (n, channels)."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg or "not a WAV file" in msg.lower():
            raise UnsupportedFormatError(f"{path}: {msg}") from exc
        raise IOError(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise IOError(f"{path}: truncated WAV file") from exc
    if len(raw) < n_frames * n_channels * sampwidth:
        raise IOError(f"{path}: truncated WAV data chunk")
    flat = _decode_pcm(raw, sampwidth)
    return flat.reshape(-1, n_channels), rate


def write_wav(path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write mono 16-bit PCM. Roundtrip error through ingest is <= 2**-15."""
    samples = np.asarray(samples, dtype=np.float64)
    quantized = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(quantized.tobytes())


def resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Polyphase windowed-sinc resampling; identity when rates match."""
    if rate_in == rate_out:
        return samples
    g = math.gcd(rate_in, rate_out)
    return resample_poly(samples, rate_out // g, rate_in // g)


def ingest(path, label: str | None = None, split: str | None = None) -> AudioClip:
    """Load a PCM WAV as a mono 16 kHz clip scaled to [-1, 1].

    Multi-channel input is averaged across channels before resampling.
    """
    frames, rate = read_wav(path)
    if frames.shape[0] == 0:
        raise EmptyClipError(f"{path}: no samples")
    mono = frames.mean(axis=1)
    mono = resample(mono, rate, SAMPLE_RATE)
    return AudioClip(
        samples=mono,
        sample_rate=SAMPLE_RATE,
        label=label,
        source_id=Path(path).stem,
        split=split,
    )


def normalize(clip: AudioClip, peak: float = NORMALIZE_PEAK) -> AudioClip:
    """Scale so the peak absolute amplitude equals `peak`; silence passes through."""
    if len(clip.samples) == 0:
        raise EmptyClipError("cannot normalize an empty clip")
    current = np.abs(clip.samples).max()
    if current == 0.0:
        return clip
    return clip.with_samples(clip.samples * (peak / current))


def _frame_rms(samples: np.ndarray, frame_len: int) -> np.ndarray:
    """RMS of consecutive non-overlapping frames; the tail partial frame counts."""
    n_frames = math.ceil(len(samples) / frame_len)
    rms = np.empty(n_frames)
    for t in range(n_frames):
        chunk = samples[t * frame_len : (t + 1) * frame_len]
        rms[t] = math.sqrt(float(np.mean(chunk**2)))
    return rms


def trim_silence(
    clip: AudioClip,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    min_gap_s: float = DEFAULT_MIN_GAP_S,
) -> AudioClip:
    """Drop silent stretches of at least `min_gap_s`.

    Silence is judged per 25 ms frame: RMS below `threshold_db` relative to
    full scale. Only runs of silent frames spanning at least `min_gap_s` are
    removed; retained audio is concatenated in order.
    """
    if threshold_db >= 0:
        raise ValueError("threshold_db must be negative (dB relative to full scale)")
    if len(clip.samples) == 0:
        raise EmptyClipError("cannot trim an empty clip")
    frame_len = int(round(TRIM_FRAME_S * clip.sample_rate))
    rms = _frame_rms(clip.samples, frame_len)
    silent = rms < 10.0 ** (threshold_db / 20.0)
    min_frames = max(1, int(round(min_gap_s / TRIM_FRAME_S)))

    keep = np.ones(len(clip.samples), dtype=bool)
    t = 0
    while t < len(silent):
        if not silent[t]:
            t += 1
            continue
        run_start = t
        while t < len(silent) and silent[t]:
            t += 1
        if t - run_start >= min_frames:
            keep[run_start * frame_len : min(t * frame_len, len(clip.samples))] = False
    trimmed = clip.samples[keep]
    if len(trimmed) == 0:
        raise EmptyClipError("clip is entirely silent after trimming")
    return clip.with_samples(trimmed)


def segment(clip: AudioClip, max_len_s: float = DEFAULT_MAX_LEN_S) -> list[AudioClip]:
    """Split into the fewest equal-length contiguous pieces, each strictly
    shorter than `max_len_s`. Piece lengths differ by at most one sample and
    concatenate exactly to the input."""
    n = len(clip.samples)
    if n == 0:
        raise EmptyClipError("cannot segment an empty clip")
    limit = max_len_s * clip.sample_rate
    if limit <= 1:
        raise ValueError("max_len_s must exceed one sample period")
    k = 1
    while math.ceil(n / k) >= limit:
        k += 1
    base, extra = divmod(n, k)
    pieces = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        pieces.append(clip.with_samples(clip.samples[start : start + size]))
        start += size
    return pieces
