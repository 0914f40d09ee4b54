"""Command-line entry point.

Every subcommand prints exactly one JSON summary line on stdout; logging and
error messages go to stderr. Exit status is 0 only when all requested
artifacts were written.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .augment import augment_dataset
from .autoencoder import fit_channel_autoencoders
from .classifiers import MODELS
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    StageError,
    emit_report,
    emit_table,
    run_ablation,
    run_experiment,
)
from .preprocess import ResampledSequence, preprocess_dataset, read_resampled, write_resampled
from .sensor_data import ParseError, load_dataset, write_dataset
from .synth import gen_dataset

log = logging.getLogger("inkmotion")

SEED_ENV = "INKMOTION_SEED"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAIL):
        super().__init__(message)
        self.code = code


def _emit(summary: dict) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    sys.stdout.flush()


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer", EXIT_CONFIG) from None


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values, then flag overrides; seed falls back to $INKMOTION_SEED."""
    raw: dict = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc.strerror or exc}", EXIT_CONFIG) from None
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON ({exc})", EXIT_CONFIG) from None
        if not isinstance(raw, dict):
            raise CliError(f"{args.config}: top level must be a JSON object", EXIT_CONFIG)
    raw = json.loads(json.dumps(raw))
    if getattr(args, "model", None):
        raw["model"] = args.model
    if getattr(args, "split", None):
        raw.setdefault("split", {})
        if not isinstance(raw["split"], dict):
            raise CliError("config key 'split' must be an object", EXIT_CONFIG)
        raw["split"]["kind"] = args.split
    if getattr(args, "aug", None):
        raw["aug"] = args.aug == "on"
    if getattr(args, "ae", None):
        raw["autoencoder"] = args.ae == "on"
    if getattr(args, "features", None) is not None:
        raw["n_features"] = args.features
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    elif "seed" not in raw:
        env = _env_seed()
        if env is not None:
            raw["seed"] = env
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from None
    # one seed drives split, augmentation and model streams unless the file pins them
    split_seed = raw.get("split", {}).get("seed") if isinstance(raw.get("split"), dict) else None
    aug_seed = raw.get("augment", {}).get("seed") if isinstance(raw.get("augment"), dict) else None
    seeded = cfg.with_seed(cfg.seed)
    if split_seed is not None:
        seeded.split.seed = split_seed
    if aug_seed is not None:
        seeded.augment.seed = aug_seed
    return seeded


def _seed_only(args: argparse.Namespace, default: int = 0) -> int:
    if args.seed is not None:
        return args.seed
    env = _env_seed()
    return default if env is None else env


def _load_rows(path: str, n_features: int, calibrate: bool = True, zero_origin: bool = True) -> list[ResampledSequence]:
    """A dataset directory is preprocessed; a file is read as resampled CSV."""
    p = Path(path)
    if not p.exists():
        raise CliError(f"dataset path {path} does not exist")
    try:
        if p.is_dir():
            return preprocess_dataset(load_dataset(p), n_features, calibrate, zero_origin)
        return read_resampled(p)
    except (ParseError, ValueError) as exc:
        raise CliError(f"cannot load {path}: {exc}") from None


def _load_data(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"dataset path {path} does not exist")
    try:
        return load_dataset(p) if p.is_dir() else read_resampled(p)
    except (ParseError, ValueError) as exc:
        raise CliError(f"cannot load {path}: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_synth(args: argparse.Namespace) -> int:
    seed = _seed_only(args)
    ds = gen_dataset(args.subjects, args.reps, seed)
    n = write_dataset(ds, args.out)
    log.info("wrote %d sequences for %d subjects to %s", n, len(ds.subjects), args.out)
    _emit({"command": "synth", "sequences": n, "subjects": len(ds.subjects), "seed": seed, "out": str(args.out)})
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    rows = _load_rows(args.dataset, args.features or 100)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_resampled(rows, out)
    _emit({"command": "preprocess", "rows": len(rows), "n_features": rows[0].n_features if rows else None, "out": str(out)})
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    rows = _load_rows(args.dataset, cfg.n_features, cfg.calibrate, cfg.zero_origin)
    out_rows = augment_dataset(rows, cfg.augment)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_resampled(out_rows, out)
    _emit({"command": "augment", "rows_in": len(rows), "rows_out": len(out_rows), "out": str(out)})
    return EXIT_OK


def cmd_train_ae(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    rows = _load_rows(args.dataset, cfg.n_features, cfg.calibrate, cfg.zero_origin)
    aes = fit_channel_autoencoders(rows, cfg.ae, cfg.seed)
    paths = aes.save(args.out)
    final = {ch: (curve[-1] if curve else None) for ch, curve in aes.curves.items()}
    _emit({"command": "train-ae", "rows": len(rows), "final_mse": final, "files": [str(p) for p in paths]})
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    data = _load_data(args.dataset)
    report = run_experiment(cfg, data)
    emit_report(report, args.out)
    _emit({
        "command": "run",
        "model": cfg.model,
        "split": cfg.split.kind,
        "aug": cfg.aug,
        "ae": cfg.autoencoder,
        "seed": cfg.seed,
        "accuracy": report.accuracies,
        "out": str(args.out),
    })
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    data = _load_data(args.dataset)
    models = [args.model] if args.model else None
    splits = [args.split] if args.split else None
    result = run_ablation(data, cfg, models=models, splits=splits, jobs=args.jobs)
    failed = [c.name for c, rep, _ in result.cells if rep is None]
    for cell, _, err in result.cells:
        if err:
            print(f"cell {cell.name} failed: {err}", file=sys.stderr)
    if result.n_ok:
        emit_table(result, args.out)
    _emit({
        "command": "ablate",
        "cells": len(result.cells),
        "ok": result.n_ok,
        "failed": failed,
        "table": str(Path(args.out) / "table.csv") if result.n_ok else None,
    })
    return EXIT_OK if result.n_ok else EXIT_FAIL


def cmd_report(args: argparse.Namespace) -> int:
    """Re-render confusion/curve artifacts from an existing report.json (or a directory of them)."""
    target = Path(args.out)
    reports = [target] if target.is_file() else sorted(target.rglob("report.json"))
    if not reports:
        raise CliError(f"no report.json found under {target}")
    rendered = []
    for path in reports:
        try:
            rep = ExperimentReport.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise CliError(f"{path}: not a valid report ({exc})") from None
        emit_report(rep, path.parent)
        rendered.append({"path": str(path), "test": rep.accuracies.get("test")})
    _emit({"command": "report", "reports": rendered})
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _positive(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inkmotion", description="Motion-based handwriting recognition pipeline.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p: argparse.ArgumentParser, dataset: bool = True) -> None:
        p.add_argument("--config", help="JSON experiment config")
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset directory or resampled CSV")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--split", choices=("random", "subject"))
        p.add_argument("--aug", choices=("on", "off"))
        p.add_argument("--ae", choices=("on", "off"))
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
        p.add_argument("--features", type=_positive, help="resampled length N (default 100)")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--subjects", type=_positive, default=8)
    p.add_argument("--reps", type=_positive, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="resample a dataset to a CSV of N x 3 rows")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--features", type=_positive)
    p.set_defaults(func=cmd_preprocess)

    for name, func, help_ in (
        ("augment", cmd_augment, "append augmented copies to resampled rows"),
        ("train-ae", cmd_train_ae, "fit the per-channel denoising autoencoders"),
        ("run", cmd_run, "run one experiment"),
        ("ablate", cmd_ablate, "run the ablation grid"),
    ):
        p = sub.add_parser(name, help=help_)
        experiment_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="re-render report artifacts")
    p.add_argument("--out", required=True, help="report.json or a directory containing reports")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"inkmotion {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"inkmotion {args.command}: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"inkmotion {args.command}: stage {exc.stage} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"inkmotion {args.command}: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
