"""Synthetic desk-scale corpus.

Eight parameterized sound classes with per-clip randomized pitch, rate, and
signal-to-noise ratio over a white-noise bed. The default four (warble,
chirp, bursts, pulse) are separable but share confusable structure: bursts
and pulse differ mainly in envelope shape, warble and chirp in whether the
pitch track is oscillatory or monotone. Clips are 4-10 s at 16 kHz mono.

With `embed_s` set, each event is shortened to 2-4 s and planted at a
random offset inside a noise-only bed of that length, so only part of a
clip carries class information. Generation is deterministic: a (seed,
class, clip index) triple fully determines every sample byte.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, AudioClip, write_wav
from .manifest import Manifest, ManifestEntry, save_manifest

CLASS_NAMES = [
    "warble",
    "chirp",
    "bursts",
    "pulse",
    "downchirp",
    "harmonics",
    "beeps",
    "rumble",
]

DURATION_RANGE = (4.0, 10.0)
EMBED_EVENT_RANGE = (2.0, 4.0)
SNR_DB_RANGE = (3.0, 18.0)
PEAK_RANGE = (0.4, 0.95)


def _edge_taper(n: int, taper_s: float = 0.01) -> np.ndarray:
    """Raised-cosine fade at both ends so events do not click."""
    env = np.ones(n)
    t = min(int(taper_s * SAMPLE_RATE), n // 2)
    if t > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(t) / t)
        env[:t] = ramp
        env[-t:] = ramp[::-1]
    return env


def synth_warble(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    f0 = rng.uniform(400.0, 1600.0)
    rate = rng.uniform(3.0, 8.0)
    depth = rng.uniform(0.03, 0.10) * f0
    phase = 2.0 * np.pi * (f0 * t + depth / (2.0 * np.pi * rate) * np.sin(2.0 * np.pi * rate * t))
    return np.sin(phase) * _edge_taper(n)


def synth_chirp(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    f_lo = rng.uniform(200.0, 700.0)
    f_hi = rng.uniform(2500.0, 6000.0)
    sweep = f_lo + (f_hi - f_lo) * t / duration
    phase = 2.0 * np.pi * np.cumsum(sweep) / SAMPLE_RATE
    return np.sin(phase) * _edge_taper(n)


def synth_bursts(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    rate = rng.uniform(1.5, 5.0)
    duty = rng.uniform(0.2, 0.45)
    period = int(SAMPLE_RATE / rate)
    burst_len = max(1, int(duty * period))
    gate = np.zeros(n)
    shape = _edge_taper(burst_len, 0.01)
    start = int(rng.uniform(0, period))
    while start < n:
        stop = min(start + burst_len, n)
        gate[start:stop] = shape[: stop - start]
        start += period
    return rng.standard_normal(n) * gate


def synth_pulse(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    rate = rng.uniform(1.5, 5.0)
    depth = rng.uniform(0.7, 1.0)
    phase = rng.uniform(0, 2 * np.pi)
    envelope = 1.0 - depth * (0.5 + 0.5 * np.sin(2.0 * np.pi * rate * t + phase))
    return rng.standard_normal(n) * envelope * _edge_taper(n)


def synth_downchirp(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    f_hi = rng.uniform(2500.0, 6000.0)
    f_lo = rng.uniform(200.0, 700.0)
    sweep = f_hi + (f_lo - f_hi) * t / duration
    phase = 2.0 * np.pi * np.cumsum(sweep) / SAMPLE_RATE
    return np.sin(phase) * _edge_taper(n)


def synth_harmonics(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    f0 = rng.uniform(150.0, 500.0)
    out = np.zeros(n)
    for k in range(1, 7):
        if k * f0 < SAMPLE_RATE / 2:
            out += np.sin(2.0 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi)) / k
    return out / np.abs(out).max() * _edge_taper(n)


def synth_beeps(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    f0 = rng.uniform(600.0, 2400.0)
    rate = rng.uniform(1.5, 5.0)
    duty = rng.uniform(0.2, 0.45)
    period = int(SAMPLE_RATE / rate)
    burst_len = max(1, int(duty * period))
    gate = np.zeros(n)
    shape = _edge_taper(burst_len, 0.01)
    start = int(rng.uniform(0, period))
    while start < n:
        stop = min(start + burst_len, n)
        gate[start:stop] = shape[: stop - start]
        start += period
    return np.sin(2.0 * np.pi * f0 * t) * gate


def synth_rumble(rng: np.random.Generator, duration: float) -> np.ndarray:
    from scipy.signal import lfilter

    n = int(duration * SAMPLE_RATE)
    cutoff = rng.uniform(150.0, 400.0)
    # one-pole lowpass on white noise
    alpha = math.exp(-2.0 * math.pi * cutoff / SAMPLE_RATE)
    out = lfilter([1.0 - alpha], [1.0, -alpha], rng.standard_normal(n))
    out /= max(np.abs(out).max(), 1e-9)
    return out * _edge_taper(n)


SYNTHS = {
    "warble": synth_warble,
    "chirp": synth_chirp,
    "bursts": synth_bursts,
    "pulse": synth_pulse,
    "downchirp": synth_downchirp,
    "harmonics": synth_harmonics,
    "beeps": synth_beeps,
    "rumble": synth_rumble,
}


def _power(x: np.ndarray) -> float:
    return float(np.mean(x**2)) or 1e-12


def synth_clip(
    class_name: str,
    rng: np.random.Generator,
    duration: float | None = None,
    snr_db: float | None = None,
    embed_s: float | None = None,
) -> np.ndarray:
    """One labeled clip: event plus white-noise bed at the drawn SNR.

    With `embed_s`, the event covers only a random 2-4 s stretch of an
    `embed_s`-second noise bed.
    """
    if class_name not in SYNTHS:
        raise ValueError(f"unknown toy class {class_name!r}")
    if embed_s is not None:
        event_duration = float(rng.uniform(*EMBED_EVENT_RANGE))
        total = int(embed_s * SAMPLE_RATE)
    else:
        event_duration = float(duration if duration is not None else rng.uniform(*DURATION_RANGE))
        total = int(event_duration * SAMPLE_RATE)
    event = SYNTHS[class_name](rng, event_duration)
    if snr_db is None:
        snr_db = float(rng.uniform(*SNR_DB_RANGE))
    noise = rng.standard_normal(total)
    # scale noise for the requested event-to-noise power ratio
    noise *= math.sqrt(_power(event) / (_power(noise) * 10.0 ** (snr_db / 10.0)))
    out = noise
    if embed_s is not None:
        offset = int(rng.uniform(0, max(total - len(event), 1)))
        out[offset : offset + len(event)] += event[: total - offset]
    else:
        out = out + event
    peak_target = rng.uniform(*PEAK_RANGE)
    out *= peak_target / max(np.abs(out).max(), 1e-9)
    return out


def generate_toyset(
    out_dir,
    classes: int = 4,
    clips_per_class: int = 25,
    seed: int = 0,
    embed_s: float | None = None,
) -> Manifest:
    """Write WAVs into out_dir/<class>/ plus a manifest.jsonl; returns the
    manifest (all entries marked train; split assignment is a separate
    step)."""
    if not 2 <= classes <= len(CLASS_NAMES):
        raise ValueError(f"classes must lie in [2, {len(CLASS_NAMES)}]")
    out_dir = Path(out_dir)
    entries = []
    for class_idx, name in enumerate(CLASS_NAMES[:classes]):
        class_dir = out_dir / name
        class_dir.mkdir(parents=True, exist_ok=True)
        for clip_idx in range(clips_per_class):
            rng = np.random.default_rng([seed, class_idx, clip_idx])
            samples = synth_clip(name, rng, embed_s=embed_s)
            path = class_dir / f"{name}_{clip_idx:04d}.wav"
            write_wav(path, samples)
            entries.append(ManifestEntry(str(path), name, "train"))
    manifest = Manifest(entries)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def toyset_clips(
    classes: int = 4,
    clips_per_class: int = 25,
    seed: int = 0,
    embed_s: float | None = None,
) -> tuple[list[AudioClip], list[str]]:
    """In-memory variant of generate_toyset (same clips, same seeds)."""
    clips = []
    labels = []
    for class_idx, name in enumerate(CLASS_NAMES[:classes]):
        for clip_idx in range(clips_per_class):
            rng = np.random.default_rng([seed, class_idx, clip_idx])
            samples = synth_clip(name, rng, embed_s=embed_s)
            clips.append(
                AudioClip(samples, SAMPLE_RATE, label=name, source_id=f"{name}_{clip_idx:04d}")
            )
            labels.append(name)
    return clips, labels
