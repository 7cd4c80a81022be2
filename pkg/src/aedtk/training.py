"""Training loop, clip-level inference rule, and evaluation reports.

One epoch crops a fresh random patch from every training feature map (or
assembles fresh same-class bags when bag training is on), shuffles, and
consumes mini-batches sequentially. All randomness flows from named
substreams of the run seed, so a (seed, config, corpus) triple pins the
entire trajectory.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .features import PATCH_FRAMES, crop_patch, inference_patches
from .models import mil_backward, mil_forward_batch, mil_loss, make_bags
from .nnet import Network, SgdMomentum, add_l1_subgradient, l1_penalty, loss_and_grads

MIL_MODES = ("off", "max", "noisy_or")
AUGMENTATION_MODES = ("none", "emda", "vtlp", "mixed")


class TrainingDivergedError(Exception):
    pass


class ConfigError(Exception):
    pass


def _stream(seed: int, tag: int, extra: int | None = None) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF, tag] if extra is None else [int(seed) & 0xFFFFFFFF, tag, extra]
    return np.random.default_rng(entropy)


@dataclass
class TrainConfig:
    """Flat run description; see README for the config-file key list."""

    arch: str = "a"
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    lambda_l1: float = 1e-6
    patch_frames: int = PATCH_FRAMES
    bands: int = 50
    width_divisor: int = 1
    dropout_keep: float = 0.5
    mil: str = "off"
    bag_size: int = 2
    seed: int = 0
    augmentation: str = "none"
    augmentation_total: int = 0
    lr_decay: float = 0.1
    lr_patience: int = 3
    eval_every: int = 1
    posterior: str = "mean"
    standardize: bool = True
    manifest: str = ""
    features_dir: str = ""
    out_dir: str = ""
    keep_checkpoints: str = "all"

    def __post_init__(self):
        if self.arch not in ("a", "b"):
            raise ConfigError(f"arch must be 'a' or 'b', got {self.arch!r}")
        if self.mil not in MIL_MODES:
            raise ConfigError(f"mil must be one of {MIL_MODES}, got {self.mil!r}")
        if self.augmentation not in AUGMENTATION_MODES:
            raise ConfigError(f"augmentation must be one of {AUGMENTATION_MODES}")
        if self.posterior not in ("mean", "max"):
            raise ConfigError("posterior must be 'mean' or 'max'")
        if self.keep_checkpoints not in ("all", "last"):
            raise ConfigError("keep_checkpoints must be 'all' or 'last'")
        for name in ("epochs", "batch_size", "bag_size", "patch_frames", "bands", "width_divisor"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive count")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Parse `key = value` lines; '#' starts a comment."""
        kwargs = {}
        fields = {f: cls.__dataclass_fields__[f].type for f in cls.__dataclass_fields__}
        casts = {"int": int, "float": float, "str": str, "bool": lambda v: v.lower() in ("1", "true", "yes")}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in fields:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                kwargs[key] = casts[fields[key]](value)
        return cls(**kwargs)


def random_crop_start(rng: np.random.Generator, n_frames: int, patch_frames: int) -> int:
    if n_frames <= patch_frames:
        return 0
    return int(rng.integers(0, n_frames - patch_frames + 1))


def run_training(
    network: Network,
    feature_maps: list[np.ndarray],
    labels: np.ndarray,
    *,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    momentum: float = 0.9,
    lambda_l1: float = 1e-6,
    patch_frames: int = PATCH_FRAMES,
    mil: str = "off",
    bag_size: int = 2,
    seed: int = 0,
    lr_decay: float = 0.1,
    lr_patience: int = 3,
    eval_fn=None,
    eval_every: int = 1,
    callbacks=(),
) -> list[dict]:
    """Train `network` in place; returns per-epoch history dicts.

    `eval_fn(network) -> accuracy` runs every `eval_every` epochs; three
    evaluations without improvement multiply the learning rate by
    `lr_decay` (set lr_patience=0 to disable). Callbacks receive
    (stats, network) after each epoch.
    """
    if mil not in MIL_MODES:
        raise ValueError(f"mil must be one of {MIL_MODES}")
    labels = np.asarray(labels, dtype=np.int64)
    n = len(feature_maps)
    if n == 0 or labels.shape != (n,):
        raise ValueError("feature_maps and labels must be non-empty and aligned")

    crop_rng = _stream(seed, 1)
    shuffle_rng = _stream(seed, 2)
    network.set_rng(_stream(seed, 3))
    optimizer = SgdMomentum(network.params(), learning_rate, momentum)

    history: list[dict] = []
    best_eval = -np.inf
    evals_since_improvement = 0

    for epoch in range(epochs):
        starts = [random_crop_start(crop_rng, fm.shape[1], patch_frames) for fm in feature_maps]

        def patch(i):
            return crop_patch(feature_maps[i], starts[i], patch_frames)

        losses = []
        sizes = []
        if mil == "off":
            order = shuffle_rng.permutation(n)
            batches = [order[s : s + batch_size] for s in range(0, n, batch_size)]
            for step, batch in enumerate(batches):
                x = np.stack([patch(i) for i in batch])
                loss = loss_and_grads(network, x, labels[batch], lambda_l1)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"loss became non-finite at epoch {epoch} batch {step} "
                        f"(learning rate {optimizer.learning_rate:g})"
                    )
                optimizer.step()
                losses.append(loss)
                sizes.append(len(batch))
        else:
            bags = make_bags(labels, bag_size, seed, epoch)
            order = shuffle_rng.permutation(len(bags))
            batches = [order[s : s + batch_size] for s in range(0, len(bags), batch_size)]
            for step, batch in enumerate(batches):
                x = np.stack(
                    [np.stack([patch(i) for i in bags[b].instance_indices]) for b in batch]
                )
                y = np.array([bags[b].label for b in batch])
                network.zero_grads()
                proba, cache = mil_forward_batch(network, x, mil, train=True)
                loss = mil_loss(proba, y) + l1_penalty(network.weight_params(), lambda_l1)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"loss became non-finite at epoch {epoch} batch {step} "
                        f"(learning rate {optimizer.learning_rate:g})"
                    )
                mil_backward(network, cache, y)
                add_l1_subgradient(network.weight_params(), lambda_l1)
                optimizer.step()
                losses.append(loss)
                sizes.append(len(batch))

        train_loss = float(np.average(losses, weights=sizes))
        eval_accuracy = None
        if eval_fn is not None and (epoch + 1) % eval_every == 0:
            eval_accuracy = float(eval_fn(network))
            if eval_accuracy > best_eval:
                best_eval = eval_accuracy
                evals_since_improvement = 0
            else:
                evals_since_improvement += 1
                if lr_patience > 0 and evals_since_improvement >= lr_patience:
                    optimizer.learning_rate *= lr_decay
                    evals_since_improvement = 0

        stats = {
            "epoch": epoch,
            "train_loss": train_loss,
            "eval_accuracy": eval_accuracy,
            "learning_rate": optimizer.learning_rate,
        }
        history.append(stats)
        for callback in callbacks:
            callback(stats, network)
    return history


# ---------------------------------------------------------------------------
# clip-level inference and reports

def clip_posterior(
    network: Network,
    feature_map: np.ndarray,
    patch_frames: int = PATCH_FRAMES,
    rule: str = "mean",
    batch_size: int = 64,
) -> np.ndarray:
    """Class distribution for one clip: patches at 50% shift are pushed
    through the network and their softmax outputs combined (arithmetic mean
    by default, elementwise max then renormalization behind `rule="max"`)."""
    patches = inference_patches(feature_map, patch_frames)
    outputs = []
    for s in range(0, len(patches), batch_size):
        outputs.append(network.forward_proba(patches[s : s + batch_size]))
    proba = np.concatenate(outputs, axis=0)
    if rule == "mean":
        return proba.mean(axis=0)
    if rule == "max":
        best = proba.max(axis=0)
        return best / best.sum()
    raise ValueError(f"unknown posterior rule {rule!r}")


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: list[float]
    confusion: np.ndarray
    clip_count: int
    classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": list(self.per_class_accuracy),
            "confusion": self.confusion.tolist(),
            "clip_count": self.clip_count,
            "classes": list(self.classes),
        }


def report_from_predictions(y_true, y_pred, classes: list[str]) -> EvalReport:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    m = len(classes)
    confusion = np.zeros((m, m), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1
    row_totals = confusion.sum(axis=1)
    per_class = [
        float(confusion[i, i] / row_totals[i]) if row_totals[i] else 0.0 for i in range(m)
    ]
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    return EvalReport(accuracy, per_class, confusion, total, list(classes))
