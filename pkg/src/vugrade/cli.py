"""Command-line entry point: one subcommand per pipeline stage.

``synth | split | train | predict | evaluate`` script the individual
stages; ``crossval`` and ``single`` run the two composite protocols
(k-fold cross-validation and train-on-A / test-on-B). Set VUGRADE_OUT_ROOT
to prefix relative output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import runs
from .cascade import load_predictions
from .errors import (
    ConfigurationError,
    SchemaError,
    ValidationError,
    VUGradeError,
)
from .metrics import render_report_table, save_report
from .records import corpus_stats, load_manifest
from .splitting import assign_folds, save_assignment
from .synthgen import SyntheticConfig, generate_corpus

OUT_ROOT_ENV = "VUGRADE_OUT_ROOT"


def _resolve_out(path: str) -> Path:
    root = os.environ.get(OUT_ROOT_ENV)
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
        return h, w
    except ValueError:
        raise ConfigurationError(f"expected HxW (e.g. 96x96), got {text!r}") from None


def _parse_prevalence(text: str) -> tuple[float, float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ConfigurationError(f"prevalence needs 4 comma-separated values, got {text!r}")
    return tuple(parts)


def _image_root(args: argparse.Namespace, manifest_attr: str = "manifest") -> Path:
    if getattr(args, "image_root", None):
        return Path(args.image_root)
    return Path(getattr(args, manifest_attr)).parent


def _run_config(args: argparse.Namespace) -> runs.RunConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in ("backend", "seed", "k", "tau", "iterations", "learning_rate", "class_weighting")
    }
    if getattr(args, "stratify", False):
        overrides["stratify"] = True
    if getattr(args, "target_size", None):
        h, w = _parse_size(args.target_size)
        replicate = (overrides.get("backend") or "baseline") == "deep"
        overrides["preprocess"] = {
            "target_size": [h, w],
            "channel_replication": replicate,
        }
    if getattr(args, "config", None):
        return runs.RunConfig.from_file(args.config, **overrides)
    return runs.RunConfig.build(**{k: v for k, v in overrides.items() if v is not None})


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SyntheticConfig(
        n_vus=args.n_vus,
        n_patients=args.n_patients,
        prevalence=_parse_prevalence(args.prevalence),
        image_size=_parse_size(args.image_size),
        noise_std=args.noise_std,
        rotation_jitter=args.rotation_jitter,
        seed=args.seed,
    )
    out = _resolve_out(args.out)
    records = generate_corpus(cfg, out)
    stats = corpus_stats(records)
    print(f"wrote {len(records)} VUs for {stats.n_patients} patients under {out}")
    print(f"grade histogram (corners pooled): {stats.class_counts}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    assignment = assign_folds(records, k=args.k, seed=args.seed, stratify=args.stratify)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_assignment(assignment, out)
    print(f"assigned {len(assignment.mapping)} patients to {args.k} folds -> {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    out = _resolve_out(args.out)
    runs.train_and_save(args.manifest, _image_root(args), cfg, out)
    print(f"trained cascade ({cfg.backend} backend) -> {out / 'model'}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runs.predict_to_csv(args.model, args.manifest, _image_root(args), out)
    print(f"wrote predictions -> {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    predictions = load_predictions(args.predictions)
    report = runs.evaluate_records(records, predictions)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_report(report, out)
    print(render_report_table(report), end="")
    print(f"report -> {out}")
    return 0


def cmd_crossval(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    out = _resolve_out(args.out)
    result = runs.run_crossval(args.manifest, _image_root(args), cfg, out)
    balanced = [r.balanced_accuracy for r in result.fold_reports]
    print((out / "crossval_table.txt").read_text(encoding="utf-8"), end="")
    print(f"fold balanced accuracies: {[round(b, 4) for b in balanced]}")
    print(f"artifacts -> {out}")
    return 0


def cmd_single(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    out = _resolve_out(args.out)
    result = runs.run_single(
        args.train_manifest,
        args.test_manifest,
        args.train_image_root or Path(args.train_manifest).parent,
        args.test_image_root or Path(args.test_manifest).parent,
        cfg,
        out,
    )
    print(render_report_table(result.report), end="")
    print(f"artifacts -> {out}")
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags override file values")
    p.add_argument("--backend", choices=["baseline", "deep"])
    p.add_argument("--tau", type=float, help="gate threshold in (0, 1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--class-weighting", choices=["none", "inverse-frequency"],
                   dest="class_weighting")
    p.add_argument("--target-size", dest="target_size", help="preprocess size as HxW")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vugrade",
        description="Two-step mSASSS grading pipeline for vertebral-unit crops.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled VU corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-vus", type=int, required=True, dest="n_vus")
    p.add_argument("--n-patients", type=int, required=True, dest="n_patients")
    p.add_argument("--prevalence", default="0.85,0.05,0.07,0.03")
    p.add_argument("--image-size", default="96x96", dest="image_size")
    p.add_argument("--noise-std", type=float, default=0.02, dest="noise_std")
    p.add_argument("--rotation-jitter", type=float, default=3.0, dest="rotation_jitter")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="write a patient-level fold assignment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratify", action="store_true")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a cascade on a full manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-root", dest="image_root")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="grade a manifest with a trained cascade")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-root", dest="image_root")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("crossval", help="patient-grouped k-fold cross-validation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-root", dest="image_root")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--stratify", action="store_true")
    _add_train_flags(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("single", help="train on one manifest, evaluate on another")
    p.add_argument("--train-manifest", required=True, dest="train_manifest")
    p.add_argument("--test-manifest", required=True, dest="test_manifest")
    p.add_argument("--train-image-root", dest="train_image_root")
    p.add_argument("--test-image-root", dest="test_image_root")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_single)

    return parser


def _write_error_record(args: argparse.Namespace, exc: VUGradeError) -> None:
    out = getattr(args, "out", None)
    if not out:
        return
    out_path = _resolve_out(out)
    target = out_path if out_path.suffix == "" else out_path.parent
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / "error.json").write_text(
            json.dumps(
                {"error": type(exc).__name__, "message": str(exc)},
                indent=2, sort_keys=True,
            ) + "\n",
            encoding="utf-8",
        )
    except OSError:
        pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, SchemaError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_error_record(args, exc)
        return 2
    except VUGradeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_error_record(args, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
