"""Corpus manifests: JSON-lines files mapping clips to labels and splits.

Each line is one JSON object with keys `path`, `label`, `split`, and the
optional keys `id` (feature-file stem, defaults to the path stem) and
`vtlp_warp` (marks a frequency-warped augmented entry whose features are
computed from the source clip with a warped filterbank).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ManifestError(Exception):
    pass


@dataclass
class ManifestEntry:
    path: str
    label: str
    split: str = "train"
    id: str | None = None
    vtlp_warp: float | None = None

    @property
    def feature_id(self) -> str:
        return self.id if self.id is not None else Path(self.path).stem

    def to_json(self) -> str:
        record = {"path": self.path, "label": self.label, "split": self.split}
        if self.id is not None:
            record["id"] = self.id
        if self.vtlp_warp is not None:
            record["vtlp_warp"] = self.vtlp_warp
        return json.dumps(record, sort_keys=True)


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    @property
    def classes(self) -> list[str]:
        """Duplicate-free class list, in sorted order."""
        return sorted({e.label for e in self.entries})

    def subset(self, split: str) -> "Manifest":
        return Manifest([e for e in self.entries if e.split == split])

    def by_class(self) -> dict[str, list[ManifestEntry]]:
        grouped: dict[str, list[ManifestEntry]] = {}
        for e in self.entries:
            grouped.setdefault(e.label, []).append(e)
        return grouped

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path) -> Manifest:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("path", "label"):
                if key not in record:
                    raise ManifestError(f"{path}:{lineno}: missing key {key!r}")
            entries.append(
                ManifestEntry(
                    path=record["path"],
                    label=record["label"],
                    split=record.get("split", "train"),
                    id=record.get("id"),
                    vtlp_warp=record.get("vtlp_warp"),
                )
            )
    return Manifest(entries)


def save_manifest(manifest: Manifest, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in manifest.entries:
            fh.write(entry.to_json() + "\n")


def split_train_test(manifest: Manifest, seed: int, train_fraction: float = 0.75) -> Manifest:
    """Assign a per-class stratified train/test split, deterministic per seed.

    The train count per class is the fraction rounded to nearest, with at
    least one test entry kept. Classes need at least 4 entries so both sides
    of the split are non-trivial.
    """
    rng = np.random.default_rng(seed)
    out: list[ManifestEntry] = []
    grouped = manifest.by_class()
    for label in sorted(grouped):
        entries = sorted(grouped[label], key=lambda e: (e.path, e.feature_id))
        if len(entries) < 4:
            raise ManifestError(
                f"class {label!r} has only {len(entries)} entries; need at least 4 to split"
            )
        order = rng.permutation(len(entries))
        n_train = int(round(train_fraction * len(entries)))
        n_train = min(n_train, len(entries) - 1)
        n_train = max(n_train, 1)
        chosen = set(order[:n_train].tolist())
        for idx, entry in enumerate(entries):
            split = "train" if idx in chosen else "test"
            out.append(
                ManifestEntry(entry.path, entry.label, split, entry.id, entry.vtlp_warp)
            )
    return Manifest(out)
