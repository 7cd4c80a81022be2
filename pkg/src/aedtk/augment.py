"""Training-set augmentation.

Two label-preserving synthesis routes:

* mixture augmentation: two clips of the same class are each run through a
  randomly parameterized second-order peaking equalizer, the second is
  delayed by a random fraction of a maximum delay, and the results are
  blended with a random convex weight;
* filterbank warping: the mel filterbank's center/edge frequencies are
  remapped by a piecewise-linear factor in [0.9, 1.1], and features for the
  source clip are recomputed with the warped bank.

The planner produces a class-balanced, seed-deterministic job list naming
source clips and every sampled parameter, so augmented corpora are exactly
reproducible from the job log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .audio import SAMPLE_RATE, AudioClip
from .features import F_MAX, N_BINS, filterbank_from_edges, mel_edge_frequencies
from .manifest import Manifest, ManifestEntry

EQ_F0_RANGE = (100.0, 6000.0)
EQ_GAIN_RANGE = (-8.0, 8.0)
EQ_Q_RANGE = (1.0, 9.0)
WARP_RANGE = (0.9, 1.1)
MIX_PEAK = 0.95


class AugmentError(Exception):
    pass


class ClassMismatchError(AugmentError):
    pass


class PlanningError(AugmentError):
    pass


@dataclass
class EqParams:
    """Peaking-filter parameters: center frequency (Hz), gain (dB), Q."""

    f0: float
    gain_db: float
    q: float

    def __post_init__(self):
        if not 0.0 < self.f0 < SAMPLE_RATE / 2:
            raise AugmentError(f"f0 must lie in (0, {SAMPLE_RATE // 2}) Hz, got {self.f0}")
        if self.q <= 0:
            raise AugmentError(f"Q must be positive, got {self.q}")


@dataclass
class EmdaParams:
    """Mixture parameters: weight alpha, delay fraction beta (both in [0,1)),
    the maximum delay in seconds (None = half the first source's duration),
    and one equalizer per source."""

    alpha: float
    beta: float
    eq1: EqParams
    eq2: EqParams
    max_delay_s: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise AugmentError(f"alpha must be in [0, 1), got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise AugmentError(f"beta must be in [0, 1), got {self.beta}")


def peaking_coefficients(p: EqParams, sample_rate: int = SAMPLE_RATE) -> tuple[np.ndarray, np.ndarray]:
    """RBJ audio-EQ-cookbook peaking filter, normalized so a[0] == 1."""
    big_a = 10.0 ** (p.gain_db / 40.0)
    w0 = 2.0 * math.pi * p.f0 / sample_rate
    alpha_q = math.sin(w0) / (2.0 * p.q)
    b = np.array([1.0 + alpha_q * big_a, -2.0 * math.cos(w0), 1.0 - alpha_q * big_a])
    a = np.array([1.0 + alpha_q / big_a, -2.0 * math.cos(w0), 1.0 - alpha_q / big_a])
    return b / a[0], a / a[0]


def peaking_gain(p: EqParams, freq_hz: float, sample_rate: int = SAMPLE_RATE) -> float:
    """|H(e^{jw})| of the filter at an arbitrary frequency."""
    b, a = peaking_coefficients(p, sample_rate)
    z = np.exp(-1j * 2.0 * math.pi * freq_hz / sample_rate * np.arange(3))
    return float(abs(np.dot(b, z) / np.dot(a, z)))


def peaking_eq(clip, p: EqParams, sample_rate: int | None = None):
    """Apply the peaking filter (direct form II transposed, zero state).

    Accepts an AudioClip or a plain sample array; returns the same type.
    Output length equals input length.
    """
    if isinstance(clip, AudioClip):
        b, a = peaking_coefficients(p, clip.sample_rate)
        return clip.with_samples(lfilter(b, a, clip.samples))
    b, a = peaking_coefficients(p, sample_rate or SAMPLE_RATE)
    return lfilter(b, a, np.asarray(clip, dtype=np.float64))


def _delay(samples: np.ndarray, shift: int, out_len: int) -> np.ndarray:
    """Right-shift into a fixed-length buffer: zeros before the onset, the
    tail truncated."""
    out = np.zeros(out_len, dtype=np.float64)
    if shift < out_len:
        n = min(len(samples), out_len - shift)
        out[shift : shift + n] = samples[:n]
    return out


def emda_mix(s1: AudioClip, s2: AudioClip, p: EmdaParams) -> AudioClip:
    """Blend two same-class clips: alpha*eq1(s1) + (1-alpha)*eq2(delay(s2)).

    The output keeps the length and label of s1. If the blend exceeds full
    scale it is peak-renormalized to 0.95 so 16-bit output cannot clip.
    """
    if s1.label != s2.label:
        raise ClassMismatchError(f"cannot mix labels {s1.label!r} and {s2.label!r}")
    if s1.sample_rate != s2.sample_rate:
        raise AugmentError("sample rates differ")
    max_delay = p.max_delay_s if p.max_delay_s is not None else 0.5 * s1.duration
    shift = int(round(p.beta * max_delay * s1.sample_rate))
    delayed = _delay(s2.samples, shift, len(s1.samples))
    mixed = p.alpha * peaking_eq(s1.samples, p.eq1, s1.sample_rate) + (1.0 - p.alpha) * peaking_eq(
        delayed, p.eq2, s1.sample_rate
    )
    peak = np.abs(mixed).max()
    if peak > 1.0:
        mixed *= MIX_PEAK / peak
    return AudioClip(
        samples=mixed,
        sample_rate=s1.sample_rate,
        label=s1.label,
        source_id=f"{s1.source_id}+{s2.source_id}",
        split=s1.split,
    )


def vtlp_warp_frequency(freq_hz, warp: float, f_max: float = F_MAX):
    """Piecewise-linear frequency map: f*warp below the breakpoint
    0.8*f_max/max(warp, 1), then linear so that f_max maps to itself."""
    if not WARP_RANGE[0] <= warp <= WARP_RANGE[1]:
        raise AugmentError(f"warp factor must lie in {WARP_RANGE}, got {warp}")
    f = np.asarray(freq_hz, dtype=np.float64)
    breakpoint_hz = 0.8 * f_max / max(warp, 1.0)
    low = f * warp
    high = breakpoint_hz * warp + (f - breakpoint_hz) * (f_max - breakpoint_hz * warp) / (
        f_max - breakpoint_hz
    )
    return np.clip(np.where(f <= breakpoint_hz, low, high), 0.0, f_max)


def vtlp_filterbank(warp: float, n_bins: int = N_BINS) -> np.ndarray:
    """The standard filterbank with every edge/center frequency warped."""
    edges = vtlp_warp_frequency(mel_edge_frequencies(), warp)
    return filterbank_from_edges(edges, n_bins)


@dataclass
class AugmentationJob:
    """One planned synthetic sample. EMDA jobs carry two source entries and
    mixture parameters; VTLP jobs carry one source entry and a warp factor."""

    kind: str
    label: str
    job_id: str
    sources: list[ManifestEntry]
    emda: EmdaParams | None = None
    warp: float | None = None

    def to_record(self) -> dict:
        record = {
            "kind": self.kind,
            "label": self.label,
            "id": self.job_id,
            "sources": [e.path for e in self.sources],
        }
        if self.emda is not None:
            record["alpha"] = self.emda.alpha
            record["beta"] = self.emda.beta
            record["max_delay_s"] = self.emda.max_delay_s
            for tag, eq in (("eq1", self.emda.eq1), ("eq2", self.emda.eq2)):
                record[tag] = {"f0": eq.f0, "gain_db": eq.gain_db, "q": eq.q}
        if self.warp is not None:
            record["warp"] = self.warp
        return record


def sample_eq_params(rng: np.random.Generator) -> EqParams:
    return EqParams(
        f0=float(rng.uniform(*EQ_F0_RANGE)),
        gain_db=float(rng.uniform(*EQ_GAIN_RANGE)),
        q=float(rng.uniform(*EQ_Q_RANGE)),
    )


def sample_emda_params(rng: np.random.Generator, max_delay_s: float | None = None) -> EmdaParams:
    return EmdaParams(
        alpha=float(rng.uniform(0.0, 1.0)),
        beta=float(rng.uniform(0.0, 1.0)),
        eq1=sample_eq_params(rng),
        eq2=sample_eq_params(rng),
        max_delay_s=max_delay_s,
    )


def plan_augmentation(manifest: Manifest, total: int, mode: str, seed: int) -> list[AugmentationJob]:
    """Build a class-balanced job list over the train split.

    Per class the job count is total//M, with the remainder spread over the
    first classes in sorted order. Mode "mixed" alternates half EMDA, half
    VTLP per class (EMDA gets the odd one). Deterministic for a given seed.
    """
    if mode not in ("emda", "vtlp", "mixed"):
        raise PlanningError(f"unknown augmentation mode {mode!r}")
    classes = manifest.classes
    if total < len(classes):
        raise PlanningError(f"total {total} is below the class count {len(classes)}")
    train = manifest.subset("train")
    grouped = train.by_class()
    rng = np.random.default_rng(seed)
    jobs: list[AugmentationJob] = []
    base, extra = divmod(total, len(classes))
    for class_idx, label in enumerate(classes):
        pool = sorted(grouped.get(label, []), key=lambda e: (e.path, e.feature_id))
        count = base + (1 if class_idx < extra else 0)
        if mode == "mixed":
            n_vtlp = count // 2
            n_emda = count - n_vtlp
        elif mode == "emda":
            n_emda, n_vtlp = count, 0
        else:
            n_emda, n_vtlp = 0, count
        if n_emda > 0 and len(pool) < 2:
            raise PlanningError(
                f"class {label!r} has {len(pool)} train clips; mixture jobs need at least 2"
            )
        if n_vtlp > 0 and len(pool) < 1:
            raise PlanningError(f"class {label!r} has no train clips")
        for j in range(n_emda):
            pair = rng.choice(len(pool), size=2, replace=False)
            jobs.append(
                AugmentationJob(
                    kind="emda",
                    label=label,
                    job_id=f"aug_emda_{label}_{j:05d}",
                    sources=[pool[pair[0]], pool[pair[1]]],
                    emda=sample_emda_params(rng),
                )
            )
        for j in range(n_vtlp):
            src = pool[int(rng.integers(len(pool)))]
            jobs.append(
                AugmentationJob(
                    kind="vtlp",
                    label=label,
                    job_id=f"aug_vtlp_{label}_{j:05d}",
                    sources=[src],
                    warp=float(rng.uniform(*WARP_RANGE)),
                )
            )
    return jobs
