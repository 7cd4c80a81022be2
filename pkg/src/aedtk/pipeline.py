"""File-level orchestration: the steps behind the command-line interface.

prepare      raw WAV tree -> processed clips + split manifest
features     manifest -> one binary feature file per entry
augment      manifest -> mixture WAVs, warped-feature entries, job log,
             and an extended manifest
train        config file -> per-epoch checkpoints + JSON-lines training log
evaluate     checkpoint + manifest -> accuracy/confusion report
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import augment as aug
from .audio import (
    AudioClip,
    EmptyClipError,
    ingest,
    normalize,
    segment,
    trim_silence,
    write_wav,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import ConvNetClassifier
from .features import extract_features, read_feature_file, standardize, write_feature_file
from .manifest import Manifest, ManifestEntry, load_manifest, save_manifest, split_train_test
from .training import EvalReport, TrainConfig, clip_posterior, report_from_predictions


def prepare(
    in_dir,
    manifest_path,
    seed: int,
    threshold_db: float = -50.0,
    max_len_s: float = 12.0,
    out_dir=None,
) -> Manifest:
    """Ingest a <class>/<file>.wav tree: normalize, trim silence, segment,
    write processed 16-bit clips, and assign a stratified 75/25 split.

    Entirely-silent clips are dropped. Processed audio lands in `out_dir`
    (default: "processed" next to the manifest).
    """
    in_dir = Path(in_dir)
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir) if out_dir else manifest_path.parent / "processed"
    entries = []
    class_dirs = sorted(p for p in in_dir.iterdir() if p.is_dir())
    if not class_dirs:
        raise FileNotFoundError(f"{in_dir}: no class subdirectories")
    for class_dir in class_dirs:
        label = class_dir.name
        for wav_path in sorted(class_dir.glob("*.wav")):
            clip = ingest(wav_path, label=label)
            clip = normalize(clip)
            try:
                clip = trim_silence(clip, threshold_db=threshold_db)
            except EmptyClipError:
                continue
            for piece_idx, piece in enumerate(segment(clip, max_len_s=max_len_s)):
                stem = f"{wav_path.stem}_seg{piece_idx:02d}"
                dest = out_dir / label / f"{stem}.wav"
                dest.parent.mkdir(parents=True, exist_ok=True)
                write_wav(dest, piece.samples, piece.sample_rate)
                entries.append(ManifestEntry(str(dest), label, "train", id=stem))
    manifest = split_train_test(Manifest(entries), seed)
    save_manifest(manifest, manifest_path)
    return manifest


def feature_path(out_dir, entry: ManifestEntry) -> Path:
    return Path(out_dir) / entry.label / f"{entry.feature_id}.feat"


def extract_all_features(manifest: Manifest, out_dir) -> int:
    """Write one feature file per manifest entry; warped entries use the
    warped filterbank. Returns the file count."""
    for entry in manifest.entries:
        clip = ingest(entry.path, label=entry.label, split=entry.split)
        fm = extract_features(clip, warp=entry.vtlp_warp)
        write_feature_file(feature_path(out_dir, entry), fm)
    return len(manifest.entries)


def run_augmentation(
    manifest: Manifest,
    out_dir,
    mode: str,
    total: int,
    seed: int,
    manifest_out=None,
) -> Manifest:
    """Execute an augmentation plan against a prepared corpus.

    Mixture jobs write new WAVs under out_dir; warp jobs only add manifest
    entries pointing at the source clip with a `vtlp_warp` key. The job log
    (out_dir/jobs.jsonl) records every sampled parameter. Returns the
    manifest extended with the augmented train entries.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = aug.plan_augmentation(manifest, total, mode, seed)
    new_entries = list(manifest.entries)
    with open(out_dir / "jobs.jsonl", "w", encoding="utf-8") as log:
        for job in jobs:
            record = job.to_record()
            if job.kind == "emda":
                s1 = ingest(job.sources[0].path, label=job.label)
                s2 = ingest(job.sources[1].path, label=job.label)
                mixed = aug.emda_mix(s1, s2, job.emda)
                dest = out_dir / job.label / f"{job.job_id}.wav"
                dest.parent.mkdir(parents=True, exist_ok=True)
                write_wav(dest, mixed.samples, mixed.sample_rate)
                record["max_delay_s"] = (
                    job.emda.max_delay_s if job.emda.max_delay_s is not None else 0.5 * s1.duration
                )
                record["path"] = str(dest)
                new_entries.append(ManifestEntry(str(dest), job.label, "train", id=job.job_id))
            else:
                src = job.sources[0]
                record["path"] = src.path
                new_entries.append(
                    ManifestEntry(src.path, job.label, "train", id=job.job_id, vtlp_warp=job.warp)
                )
            log.write(json.dumps(record, sort_keys=True) + "\n")
    extended = Manifest(new_entries)
    if manifest_out:
        save_manifest(extended, manifest_out)
    return extended


def _load_split_features(manifest: Manifest, features_dir, split: str):
    maps, labels = [], []
    for entry in manifest.subset(split).entries:
        path = feature_path(features_dir, entry)
        if not path.exists():
            raise IOError(f"missing feature file for entry {entry.path!r}: {path}")
        maps.append(read_feature_file(path))
        labels.append(entry.label)
    return maps, labels


def train(config: TrainConfig) -> Path:
    """Run a training job described by a TrainConfig with file paths set.

    Writes checkpoint_epochNNN.ckpt (or just the last, per
    keep_checkpoints), a final checkpoint.ckpt, and training_log.jsonl into
    config.out_dir. Returns the final checkpoint path.
    """
    if not config.manifest or not config.features_dir or not config.out_dir:
        raise ValueError("config must set manifest, features_dir, and out_dir")
    manifest = load_manifest(config.manifest)
    if config.augmentation != "none":
        aug_dir = Path(config.out_dir) / "augmented"
        manifest = run_augmentation(
            manifest, aug_dir, config.augmentation, config.augmentation_total, config.seed
        )
        for entry in manifest.entries:
            path = feature_path(config.features_dir, entry)
            if not path.exists():
                clip = ingest(entry.path, label=entry.label)
                write_feature_file(path, extract_features(clip, warp=entry.vtlp_warp))

    maps, labels = _load_split_features(manifest, config.features_dir, "train")
    test_maps, test_labels = [], []
    if any(e.split == "test" for e in manifest.entries):
        test_maps, test_labels = _load_split_features(manifest, config.features_dir, "test")

    clf = ConvNetClassifier(
        arch=config.arch,
        epochs=config.epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        momentum=config.momentum,
        lambda_l1=config.lambda_l1,
        patch_frames=config.patch_frames,
        bands=config.bands,
        width_divisor=config.width_divisor,
        dropout_keep=config.dropout_keep,
        mil=config.mil,
        bag_size=config.bag_size,
        standardize=config.standardize,
        lr_decay=config.lr_decay,
        lr_patience=config.lr_patience,
        eval_every=config.eval_every,
        posterior=config.posterior,
        random_state=config.seed,
    )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "training_log.jsonl"
    meta = {"config": config.to_dict()}

    def snapshot(stats, network):
        epoch = stats["epoch"]
        name = "checkpoint_last.ckpt" if config.keep_checkpoints == "last" else f"checkpoint_epoch{epoch:03d}.ckpt"
        save_checkpoint(
            out_dir / name,
            network,
            classes=list(clf.classes_),
            feature_mean=clf.feature_mean_,
            feature_std=clf.feature_std_,
            meta={**meta, "epoch": epoch},
        )
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(stats, sort_keys=True) + "\n")

    log_path.unlink(missing_ok=True)
    eval_set = (test_maps, test_labels) if test_maps else None
    clf.fit(maps, labels, eval_set=eval_set, callbacks=[snapshot])

    final = out_dir / "checkpoint.ckpt"
    save_checkpoint(
        final,
        clf.network_,
        classes=list(clf.classes_),
        feature_mean=clf.feature_mean_,
        feature_std=clf.feature_std_,
        meta=meta,
    )
    return final


def evaluate(checkpoint_path, manifest_path, features_dir, posterior: str = "mean") -> EvalReport:
    """Score the test split of a manifest with a trained checkpoint."""
    bundle = load_checkpoint(checkpoint_path)
    network = bundle["network"]
    classes = bundle["classes"]
    mean, std = bundle["feature_mean"], bundle["feature_std"]
    patch_frames = network.spec.input_shape[1]
    manifest = load_manifest(manifest_path) if not isinstance(manifest_path, Manifest) else manifest_path
    class_index = {label: i for i, label in enumerate(classes)}
    y_true, y_pred = [], []
    for entry in manifest.subset("test").entries:
        path = feature_path(features_dir, entry)
        if not path.exists():
            raise IOError(f"missing feature file for entry {entry.path!r}: {path}")
        fm = read_feature_file(path)
        if mean is not None:
            fm = standardize(fm, mean, std)
        posterior_vec = clip_posterior(network, fm, patch_frames, posterior)
        y_true.append(class_index[entry.label])
        y_pred.append(int(posterior_vec.argmax()))
    return report_from_predictions(y_true, y_pred, classes)
