"""Plot-data emission: turn evaluation reports into CSV series.

Reports are JSON files carrying an accuracy plus the run coordinates
(patch_frames, augmentation mode and total). Each report becomes one CSV
row; sweeps over patch length and over augmentation volume come out as
separate files ready for external plotting.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


def load_report_records(logs_dir) -> list[dict]:
    records = []
    for path in sorted(Path(logs_dir).glob("*.json")):
        with open(path, "r", encoding="utf-8") as fh:
            record = json.load(fh)
        record.setdefault("name", path.stem)
        records.append(record)
    return records


def write_plot_data(records: list[dict], out_dir) -> list[Path]:
    """Emit patch_length.csv and augmentation_<mode>.csv files.

    A record lands in patch_length.csv when it has a `patch_frames` key and
    in augmentation_<mode>.csv when it has `augmentation` != "none" and an
    `augmentation_total`. Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    patch_rows = [
        (r["patch_frames"], r["accuracy"], r.get("name", ""))
        for r in records
        if "patch_frames" in r and "accuracy" in r
    ]
    if patch_rows:
        path = out_dir / "patch_length.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patch_frames", "accuracy", "name"])
            writer.writerows(sorted(patch_rows))
        written.append(path)

    by_mode: dict[str, list] = {}
    for r in records:
        mode = r.get("augmentation")
        if mode and mode != "none" and "augmentation_total" in r and "accuracy" in r:
            by_mode.setdefault(mode, []).append(
                (r["augmentation_total"], r["accuracy"], r.get("name", ""))
            )
    for mode, rows in sorted(by_mode.items()):
        path = out_dir / f"augmentation_{mode}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["augmentation_total", "accuracy", "name"])
            writer.writerows(sorted(rows))
        written.append(path)
    return written
