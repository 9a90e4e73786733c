"""Command-line harness: ``circrot {synth,train,eval,compare}``.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Every random choice
derives from the seeds given on the command line. The default output
directory can be set with ``CIRCROT_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codecs import METHODS, decode, make_codec
from .features import KINDS, FeatureExtractor
from .metrics import MetricsReport, errors_csv, evaluate
from .model import (
    OPTIMIZERS,
    RotationStream,
    TrainConfig,
    TrainingDiverged,
    forward,
    load_params,
    manifest_features,
    save_params,
    train,
)
from .synthdata import STYLES, build_splits, read_manifest, write_dataset

ENV_OUTPUT_DIR = "CIRCROT_OUTPUT_DIR"
COMPARE_SCHEMA = "circrot.compare/1"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _method(text: str) -> str:
    if text not in METHODS:
        raise argparse.ArgumentTypeError(f"unknown method {text!r}; valid methods: {', '.join(METHODS)}")
    return text


def _default_out(sub: str) -> Path:
    return Path(os.environ.get(ENV_OUTPUT_DIR, "runs")) / sub


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=_positive_int, default=d.batch_size)
    p.add_argument("--epochs", type=_positive_int, default=d.max_epochs, help="maximum epochs")
    p.add_argument("--patience", type=_positive_int, default=d.patience)
    p.add_argument("--optimizer", choices=OPTIMIZERS, default=d.optimizer)
    p.add_argument("--hidden", type=_positive_int, default=d.hidden)
    p.add_argument("--features", choices=KINDS, default="grad_orientation_histogram")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="circrot", description="Circular-aware rotation angle estimation toolkit.")
    parser.add_argument("--version", action="version", version=f"circrot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--train", type=_positive_int, default=2000, help="scenes in the train+val pool")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--test", type=_positive_int, default=500)
    p.add_argument("--split-seed", type=int, default=1)
    p.add_argument("--test-seed", type=int, default=2)
    p.add_argument("--size", type=int, default=96, help="base scene side in pixels")
    p.add_argument("--out-size", type=_positive_int, default=64)
    p.add_argument("--style", choices=STYLES, default="gradient_horizon")
    p.add_argument("--noise", type=float, default=0.0, help="additive noise std")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("train", help="train one codec")
    p.add_argument("--method", type=_method, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a trained head or a predictions file")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", choices=("val", "test"), default="test")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", type=Path)
    src.add_argument("--predictions", type=Path, help="CSV with columns path,angle_deg")
    src.add_argument("--ground-truth", action="store_true", help="score the truths against themselves")
    p.add_argument("--method", type=_method, default=None, help="expected method of --model")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("compare", help="train and evaluate every method with shared seeds")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--runs", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0, help="training seed of run 0; run r uses seed + r")
    p.add_argument("--methods", default=",".join(METHODS), help="comma-separated subset of methods")
    p.add_argument("--include-naive-da", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    _add_train_flags(p)
    return parser


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=min(args.patience, args.epochs),
        optimizer=args.optimizer,
        seed=seed,
        hidden=args.hidden,
    )


def _feature_extractor(args, manifest) -> FeatureExtractor:
    return FeatureExtractor(kind=args.features, image_size=manifest.out_size)


def _dataset_info(data: Path) -> dict:
    path = data / "dataset.json"
    if not path.exists():
        raise FileNotFoundError(f"{data} is not a dataset directory (missing dataset.json)")
    return json.loads(path.read_text())


def cmd_synth(args) -> int:
    if not 0.0 < args.val_fraction < 1.0:
        raise UsageError("--val-fraction must be in (0, 1)")
    if args.size < 32:
        raise UsageError("--size must be at least 32")
    if args.noise < 0:
        raise UsageError("--noise must be nonnegative")
    try:
        manifests = build_splits(
            args.train, args.val_fraction, args.test, args.split_seed, args.test_seed, args.out_size,
            size=args.size, style=args.style, noise_std=args.noise,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = args.out or _default_out("data")
    write_dataset(out, manifests, {"split_seed": args.split_seed, "test_seed": args.test_seed})
    counts = ", ".join(f"{m.split}={len(m)}" for m in manifests)
    print(f"wrote {out}: {counts}")
    return EXIT_OK


def cmd_train(args) -> int:
    tr, va = read_manifest(args.data, "train"), read_manifest(args.data, "val")
    codec = make_codec(args.method)
    fx = _feature_extractor(args, va)
    params, log = train(codec, fx, tr, va, _train_config(args, args.seed))
    out = args.out or _default_out("train")
    out.mkdir(parents=True, exist_ok=True)
    save_params(out / f"{codec.name}.head", params, codec, fx)
    (out / f"{codec.name}_log.csv").write_text(log.to_csv())
    print(f"{codec.name}: best val MAE {log.best_val_mae:.4f} deg at epoch {log.best_epoch}")
    return EXIT_OK


def _read_predictions(path: Path, manifest) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"path", "angle_deg"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns path,angle_deg")
    by_path = {r["path"]: float(r["angle_deg"]) for r in rows}
    missing = [e.path for e in manifest.entries if e.path not in by_path]
    if missing:
        raise ValueError(f"{path}: no prediction for {missing[0]} ({len(missing)} missing)")
    return np.array([by_path[e.path] for e in manifest.entries])


def cmd_eval(args) -> int:
    manifest = read_manifest(args.data, args.split)
    truths = manifest.angles
    if args.ground_truth:
        preds = truths.copy()
    elif args.predictions is not None:
        preds = _read_predictions(args.predictions, manifest)
    else:
        params, codec, fx = load_params(args.model)
        if args.method is not None and args.method != codec.method:
            raise ValueError(f"{args.model} holds a {codec.method!r} head, not {args.method!r}")
        if fx.image_size != manifest.out_size:
            raise ValueError(f"{args.model} expects {fx.image_size}px images, dataset has {manifest.out_size}px")
        preds = np.atleast_1d(decode(codec, forward(params, manifest_features(fx, manifest))))
    report = evaluate(preds, truths)
    out = args.out or _default_out("eval")
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.to_json())
    (out / "metrics.csv").write_text(report.to_csv())
    (out / "errors.csv").write_text(errors_csv(preds, truths))
    print(f"MAE {report.mae:.4f}  median {report.median:.4f}  Acc@5 {report.acc_at[5]:.4f}  (n={report.n})")
    return EXIT_OK


def _cell(values: list[float], runs: int) -> str:
    if runs == 1:
        return f"{values[0]:.4f}"
    return f"{np.mean(values):.4f}({np.std(values, ddof=1):.4f})"


def compare_table(results: dict[str, list[MetricsReport | str]], runs: int) -> tuple[list[str], list[list[str]]]:
    """Rows of ``method, status, <metric columns>`` from per-run reports.

    A method with any failed run is reported as failed with the first
    failure message.
    """
    columns = None
    rows = []
    for method, reports in results.items():
        ok = [r for r in reports if isinstance(r, MetricsReport)]
        if ok and columns is None:
            columns = [c for c in ok[0].flat() if c != "n"]
        rows.append((method, reports, ok))
    columns = columns or []
    header = ["method", "status", *columns]
    body = []
    for method, reports, ok in rows:
        if len(ok) != len(reports):
            msg = next(r for r in reports if not isinstance(r, MetricsReport))
            body.append([method, f"failed: {msg}", *[""] * len(columns)])
        else:
            body.append([method, "ok", *(_cell([r.flat()[c] for r in ok], runs) for c in columns)])
    return header, body


def _markdown(header: list[str], body: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"unknown method {unknown[0] if unknown else ''!r}; valid methods: {', '.join(METHODS)}")
    names = methods + (["da_naive"] if args.include_naive_da else [])
    info = _dataset_info(args.data)
    tr, va, te = (read_manifest(args.data, s) for s in ("train", "val", "test"))
    fx = _feature_extractor(args, va)
    out = args.out or _default_out("compare")
    out.mkdir(parents=True, exist_ok=True)

    xv, xt = manifest_features(fx, va), manifest_features(fx, te)
    results: dict[str, list] = {n: [] for n in names}
    for r in range(args.runs):
        seed = args.seed + r
        stream = RotationStream(fx, tr, seed)
        for name in names:
            codec = make_codec(name)
            suffix = f"_run{r}" if args.runs > 1 else ""
            try:
                params, log = train(codec, fx, tr, va, _train_config(args, seed), stream=stream, val_features=xv)
            except (TrainingDiverged, FloatingPointError, ValueError) as exc:
                results[name].append(str(exc).replace("\n", " "))
                print(f"run {r} {name}: failed ({exc})", file=sys.stderr)
                continue
            preds = np.atleast_1d(decode(codec, forward(params, xt)))
            report = evaluate(preds, te.angles)
            results[name].append(report)
            (out / f"errors_{name}{suffix}.csv").write_text(errors_csv(preds, te.angles))
            (out / f"log_{name}{suffix}.csv").write_text(log.to_csv())
            print(f"run {r} {name}: test MAE {report.mae:.4f} (best epoch {log.best_epoch})")

    header, body = compare_table(results, args.runs)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([header, *body])
    (out / "compare.csv").write_text(buf.getvalue())
    (out / "compare.md").write_text(_markdown(header, body))
    meta = {
        "schema": COMPARE_SCHEMA,
        "methods": names,
        "runs": args.runs,
        "train_seeds": [args.seed + r for r in range(args.runs)],
        "split_seed": info.get("split_seed"),
        # one test seed for every method
        "test_seed": info.get("test_seed"),
        "n_train": len(tr),
        "n_val": len(va),
        "n_test": len(te),
        "cell_format": "value" if args.runs == 1 else "mean(std), sample std over runs",
    }
    (out / "compare.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(_markdown(header, body), end="")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
