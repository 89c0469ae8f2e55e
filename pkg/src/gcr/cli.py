"""Command-line entry point: ``gcr <subcommand> ...``.

Subcommands: gen-data, train, eval, angles, feature-stats, bench.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure. Failures
print one line ``error: <Category>: <message>`` to stderr.
"""
import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .analysis import FeatureBank, angle_report, class_separation_r2, intra_class_variability
from .bench import parse_shapes, run_benchmark
from .data import make_blobs, read_dataset, write_dataset
from .errors import GcrError, InvalidSpec
from .heads import GcrHead
from .train import TrainConfig, evaluate, train

OUTPUT_ROOT_ENV = "GCR_OUTPUT_ROOT"
METRIC_COLUMNS = ("epoch", "step", "loss", "top1", "ortho_error", "wall_ms")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_csv(path_or_fh, header, rows):
    fh = open(path_or_fh, "w", newline="") if isinstance(path_or_fh, (str, Path)) else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if fh is not path_or_fh:
            fh.close()


# ---------------------------------------------------------------- gen-data

def cmd_gen_data(args):
    train_set, test_set = make_blobs(args.classes, args.dim, args.per_class, args.spread,
                                     args.seed, args.modes, args.test_per_class)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(train_set, out / "features.csv", out / "labels.csv")
    if test_set is not None:
        write_dataset(test_set, out / "test_features.csv", out / "test_labels.csv")
    print(f"wrote {len(train_set)} training samples to {out}")
    return 0


# ------------------------------------------------------------------- train

def load_config(path, overrides):
    values = {}
    if path:
        try:
            with open(path) as fh:
                values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: {exc}") from exc
        if not isinstance(values, dict):
            raise InvalidSpec(f"{path}: config must be a JSON object")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(values)


def cmd_train(args):
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in dataclasses.fields(TrainConfig)}
    config = load_config(args.config, overrides)
    dataset = read_dataset(args.features, args.labels, args.num_classes)
    inputs = {"features": _sha256_file(args.features), "labels": _sha256_file(args.labels)}
    digest = hashlib.sha256(json.dumps({"config": config.to_dict(), "inputs": inputs},
                                       sort_keys=True).encode()).hexdigest()
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    run_dir = Path(args.run_dir) if args.run_dir else root / f"run-{digest[:12]}"
    if run_dir.exists() and any(run_dir.iterdir()):
        raise InvalidSpec(f"run directory {run_dir} already exists; runs are append-only")
    run_dir.mkdir(parents=True, exist_ok=True)

    result = train(config, dataset)
    metrics_path = run_dir / "metrics.csv"
    _write_csv(metrics_path, METRIC_COLUMNS,
               [[row[c] for c in METRIC_COLUMNS] for row in result.log])
    ckpt = ckpt_io.from_training(result, config, {"run_hash": digest,
                                                  "num_classes": dataset.num_classes})
    ckpt_io.save(run_dir / "checkpoint.gcr", ckpt)
    manifest = {"run_hash": digest, "seed": config.seed, "config": config.to_dict(),
                "inputs": {"features": str(args.features), "labels": str(args.labels),
                           "sha256": inputs},
                "artifacts": {name: _sha256_file(run_dir / name)
                              for name in ("metrics.csv", "checkpoint.gcr")}}
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    last = result.log[-1]
    print(f"run_dir={run_dir} top1={_fmt(last['top1'])} ortho_error={_fmt(last['ortho_error'])}")
    return 0


# -------------------------------------------------------------------- eval

def _load_model(path):
    return ckpt_io.load(path)


def cmd_eval(args):
    ckpt = _load_model(args.checkpoint)
    dataset = read_dataset(args.features, args.labels, ckpt.model.head.num_classes)
    top1, per_class = evaluate(ckpt.model, dataset)
    counts = dataset.class_counts()
    lines = [f"top1={_fmt(top1)}"]
    rows = [[c, int(counts[c]), "absent" if np.isnan(a) else _fmt(a)]
            for c, a in enumerate(per_class)]
    sys.stdout.write("\n".join(lines) + "\n")
    _write_csv(sys.stdout, ["class", "count", "accuracy"], rows)
    return 0


# ------------------------------------------------------------------ angles

def cmd_angles(args):
    ckpt = _load_model(args.checkpoint)
    head = ckpt.model.head
    if not isinstance(head, GcrHead):
        raise InvalidSpec("angles needs a checkpoint with a gcr head")
    report = angle_report(head.param)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "angles.csv", out / "min_angle.csv", out / "max_angle.csv")
    off = ~np.eye(report.num_classes, dtype=bool)
    if off.any():
        print(f"min_angle_mean={_fmt(report.min_angle[off].mean())} "
              f"max_angle_mean={_fmt(report.max_angle[off].mean())}")
    return 0


# ----------------------------------------------------------- feature-stats

def cmd_feature_stats(args):
    if args.feature_csv:
        data = read_dataset(args.feature_csv, args.labels)
        feats, labels, num_classes = data.x, data.y, None
    else:
        if not (args.checkpoint and args.features):
            raise UsageError("give --checkpoint with --features, or --feature-csv")
        ckpt = _load_model(args.checkpoint)
        num_classes = ckpt.model.head.num_classes
        data = read_dataset(args.features, args.labels, num_classes)
        feats, labels = ckpt.model.features(data.x), data.y
    variability = intra_class_variability(FeatureBank.from_features(feats, labels), num_classes)
    r2 = class_separation_r2(FeatureBank(feats, labels), num_classes, center=args.r2_center)
    _write_csv(sys.stdout, ["metric", "value"], [["variability", variability], ["r2", r2]])
    return 0


# ------------------------------------------------------------------- bench

def cmd_bench(args):
    try:
        shapes = parse_shapes(args.shapes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_benchmark(shapes, args.repeats, args.seed)
    table = [[r["C"], r["n"], r["k"], r["svd_ms"], r["qr_ms"]] for r in rows]
    header = ["C", "n", "k", "svd_ms", "qr_ms"]
    if args.out:
        _write_csv(args.out, header, table)
    else:
        _write_csv(sys.stdout, header, table)
    return 0


def build_parser():
    p = _Parser(prog="gcr", description="Grassmann class representation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic Gaussian-mixture dataset")
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--per-class", type=int, required=True)
    g.add_argument("--spread", type=float, default=0.5)
    g.add_argument("--modes", type=int, default=1)
    g.add_argument("--test-per-class", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a backbone and head, write a run directory")
    t.add_argument("--config", help="JSON file with TrainConfig fields")
    t.add_argument("--features", required=True)
    t.add_argument("--labels", required=True)
    t.add_argument("--num-classes", type=int)
    t.add_argument("--run-dir")
    for f in dataclasses.fields(TrainConfig):
        kind = _bool if isinstance(f.default, bool) else type(f.default)
        t.add_argument("--" + f.name.replace("_", "-"), dest=f"cfg_{f.name}", type=kind,
                       default=None, help=f"override config (default {f.default})")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="top-1 and per-class accuracy of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--labels", required=True)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("angles", help="pairwise principal angles between class subspaces")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_angles)

    s = sub.add_parser("feature-stats", help="intra-class variability and class separation R^2")
    s.add_argument("--checkpoint")
    s.add_argument("--features", help="raw inputs, passed through the checkpoint's backbone")
    s.add_argument("--feature-csv", help="precomputed features (no checkpoint needed)")
    s.add_argument("--labels", required=True)
    s.add_argument("--r2-center", action="store_true", help="center features before R^2")
    s.set_defaults(func=cmd_feature_stats)

    b = sub.add_parser("bench", help="time thin SVD and QR on C x n x k stacks")
    b.add_argument("--shapes", default="1000x2048x1,1000x2048x2,1000x2048x4,1000x2048x8")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: Usage: {exc}", file=sys.stderr)
        return 1
    except GcrError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: DataError: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"error: NumericError: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
