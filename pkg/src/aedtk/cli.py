"""Command-line interface.

    aedtk toyset   --out DIR --seed N [--classes 4] [--clips 25] [--embed S]
    aedtk prepare  --in DIR --manifest FILE --seed N
                   [--threshold-db -50] [--max-len 12] [--out DIR]
    aedtk features --manifest FILE --out DIR
    aedtk augment  --manifest FILE --mode MODE --total N --seed N --out DIR
                   [--manifest-out FILE]
    aedtk train    --config FILE [--arch a|b] [--mil off|max|noisy-or]
                   [--bag-size N]
    aedtk eval     --checkpoint FILE --manifest FILE --features DIR
                   [--posterior mean|max] [--out FILE]
    aedtk report   --logs DIR --out DIR
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _cmd_toyset(args):
    from .toyset import generate_toyset

    manifest = generate_toyset(
        args.out, classes=args.classes, clips_per_class=args.clips, seed=args.seed,
        embed_s=args.embed,
    )
    print(f"wrote {len(manifest)} clips to {args.out}")


def _cmd_prepare(args):
    from .pipeline import prepare

    manifest = prepare(
        args.in_dir, args.manifest, args.seed,
        threshold_db=args.threshold_db, max_len_s=args.max_len, out_dir=args.out,
    )
    n_train = len(manifest.subset("train"))
    n_test = len(manifest.subset("test"))
    print(f"wrote {args.manifest}: {n_train} train / {n_test} test entries, "
          f"{len(manifest.classes)} classes")


def _cmd_features(args):
    from .manifest import load_manifest
    from .pipeline import extract_all_features

    manifest = load_manifest(args.manifest)
    count = extract_all_features(manifest, args.out)
    print(f"wrote {count} feature files to {args.out}")


def _cmd_augment(args):
    from .manifest import load_manifest
    from .pipeline import run_augmentation

    manifest = load_manifest(args.manifest)
    mode = args.mode.replace("-", "_")
    extended = run_augmentation(
        manifest, args.out, mode, args.total, args.seed,
        manifest_out=args.manifest_out,
    )
    print(f"planned {len(extended) - len(manifest)} augmented entries; "
          f"job log at {Path(args.out) / 'jobs.jsonl'}")


def _cmd_train(args):
    from .pipeline import train
    from .training import TrainConfig

    config = TrainConfig.from_file(args.config)
    overrides = {}
    if args.arch:
        overrides["arch"] = args.arch
    if args.mil:
        overrides["mil"] = args.mil.replace("-", "_")
    if args.bag_size:
        overrides["bag_size"] = args.bag_size
    if overrides:
        config = TrainConfig(**{**config.to_dict(), **overrides})
    checkpoint = train(config)
    print(f"final checkpoint: {checkpoint}")


def _cmd_eval(args):
    from .pipeline import evaluate

    report = evaluate(args.checkpoint, args.manifest, args.features, posterior=args.posterior)
    payload = report.to_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        print(f"report written to {args.out}")


def _cmd_report(args):
    from .reporting import load_report_records, write_plot_data

    records = load_report_records(args.logs)
    written = write_plot_data(records, args.out)
    for path in written:
        print(f"wrote {path}")
    if not written:
        print("no plottable records found", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aedtk", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toyset", help="generate the synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--clips", type=int, default=25)
    p.add_argument("--embed", type=float, default=None,
                   help="embed each event in a noise bed of this many seconds")
    p.set_defaults(func=_cmd_toyset)

    p = sub.add_parser("prepare", help="ingest, clean, and split a corpus")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threshold-db", type=float, default=-50.0)
    p.add_argument("--max-len", type=float, default=12.0)
    p.add_argument("--out", default=None, help="processed-clip directory")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("features", help="extract feature files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("augment", help="synthesize augmented training data")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=["emda", "vtlp", "mixed"])
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-out", default=None)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--arch", choices=["a", "b"], default=None)
    p.add_argument("--mil", choices=["off", "max", "noisy-or"], default=None)
    p.add_argument("--bag-size", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--posterior", choices=["mean", "max"], default="mean")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="emit CSV plot data from reports")
    p.add_argument("--logs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
