"""aedtk: an acoustic event detection toolkit.

End-to-end pieces: WAV ingestion and cleanup, 3-channel log-mel features,
waveform mixture / filterbank-warp augmentation, a from-scratch NumPy
network engine with small-kernel deep CNN architectures, bag-level
(multiple-instance) aggregation heads, and scikit-learn style estimators
tying it together.
"""

from .audio import AudioClip, ingest, normalize, segment, trim_silence, write_wav
from .augment import EmdaParams, EqParams, emda_mix, peaking_eq, plan_augmentation, vtlp_filterbank
from .estimator import ConvNetClassifier, LogMelTransformer
from .features import (
    crop_patch,
    deltas,
    extract_features,
    frame_spectra,
    inference_patches,
    logmel_energy,
    mel_filterbank,
)
from .manifest import Manifest, ManifestEntry, load_manifest, save_manifest, split_train_test
from .models import build_arch_a, build_arch_b, make_bags, mil_forward
from .nnet import Network, NetworkSpec, count_params
from .training import EvalReport, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "ConvNetClassifier",
    "EmdaParams",
    "EqParams",
    "EvalReport",
    "LogMelTransformer",
    "Manifest",
    "ManifestEntry",
    "Network",
    "NetworkSpec",
    "TrainConfig",
    "build_arch_a",
    "build_arch_b",
    "count_params",
    "crop_patch",
    "deltas",
    "emda_mix",
    "extract_features",
    "frame_spectra",
    "inference_patches",
    "ingest",
    "load_manifest",
    "logmel_energy",
    "make_bags",
    "mel_filterbank",
    "mil_forward",
    "normalize",
    "peaking_eq",
    "plan_augmentation",
    "save_manifest",
    "segment",
    "split_train_test",
    "trim_silence",
    "vtlp_filterbank",
    "write_wav",
]
