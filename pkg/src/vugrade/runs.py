"""Run orchestration: resolved configs, cross-validation, cross-study runs.

Every run directory is self-describing: it holds a resolved copy of the
full configuration (seeds included), so a rerun from that file alone
reproduces the artifacts byte for byte with the baseline backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .backends import ClassifierSpec
from .cascade import (
    CascadeModel,
    CornerPrediction,
    load_cascade,
    predict_corners,
    save_cascade,
    train_cascade,
    write_predictions,
)
from .errors import ConfigurationError, ReportError
from .metrics import (
    CrossvalTable,
    MetricsReport,
    crossval_aggregate,
    crossval_table_to_csv,
    crossval_table_to_dict,
    evaluate_corners,
    render_crossval_table,
    render_report_table,
    save_report,
)
from .preprocessing import PreprocessConfig, VUImage, preprocess_image
from .records import CornerSite, VURecord, load_manifest
from .splitting import assign_folds, materialize_split, save_assignment

SCHEMA_VERSION = 1

_BACKEND_DEFAULTS = {
    # preprocess target, iterations, learning rate
    "baseline": ((64, 64), False, 400, 0.05),
    "deep": ((224, 224), True, 5, 1e-3),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters for one pipeline run."""

    backend: str = "baseline"
    seed: int = 0
    k: int = 5
    tau: float = 0.5
    stratify: bool = False
    preprocess: PreprocessConfig = PreprocessConfig(
        target_size=(64, 64), channel_replication=False
    )
    stage1: ClassifierSpec = ClassifierSpec(kind="baseline", n_outputs=2)
    stage2: ClassifierSpec = ClassifierSpec(kind="baseline", n_outputs=6, n_heads=2)

    @classmethod
    def build(
        cls,
        backend: str = "baseline",
        seed: int = 0,
        k: int = 5,
        tau: float = 0.5,
        stratify: bool = False,
        iterations: int | None = None,
        learning_rate: float | None = None,
        class_weighting: str | None = None,
        preprocess: PreprocessConfig | dict | None = None,
        stage1: ClassifierSpec | dict | None = None,
        stage2: ClassifierSpec | dict | None = None,
    ) -> "RunConfig":
        """Fill in backend-appropriate defaults for anything not given."""
        if backend not in _BACKEND_DEFAULTS:
            raise ConfigurationError(
                f"backend must be one of {sorted(_BACKEND_DEFAULTS)}, got {backend!r}"
            )
        target, replicate, default_iters, default_lr = _BACKEND_DEFAULTS[backend]
        if preprocess is None:
            preprocess = PreprocessConfig(target_size=target, channel_replication=replicate)
        elif isinstance(preprocess, dict):
            preprocess = PreprocessConfig.from_dict(preprocess)

        def resolve_spec(
            given: ClassifierSpec | dict | None, n_outputs: int, n_heads: int
        ) -> ClassifierSpec:
            if isinstance(given, ClassifierSpec):
                return given
            if isinstance(given, dict):
                merged = {"kind": backend, "n_outputs": n_outputs, "n_heads": n_heads}
                merged.update(given)
                return ClassifierSpec.from_dict(merged)
            return ClassifierSpec(
                kind=backend,
                n_outputs=n_outputs,
                n_heads=n_heads,
                iterations=default_iters if iterations is None else iterations,
                learning_rate=default_lr if learning_rate is None else learning_rate,
                seed=seed,
                class_weighting=class_weighting or "none",
            )

        return cls(
            backend=backend,
            seed=seed,
            k=k,
            tau=tau,
            stratify=stratify,
            preprocess=preprocess,
            stage1=resolve_spec(stage1, n_outputs=2, n_heads=1),
            stage2=resolve_spec(stage2, n_outputs=6, n_heads=2),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "backend": self.backend,
            "seed": self.seed,
            "k": self.k,
            "tau": self.tau,
            "stratify": self.stratify,
            "preprocess": self.preprocess.to_dict(),
            "stage1": self.stage1.to_dict(),
            "stage2": self.stage2.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported config schema_version {version!r}")
        known = {
            "backend", "seed", "k", "tau", "stratify",
            "iterations", "learning_rate", "class_weighting",
            "preprocess", "stage1", "stage2",
        }
        unknown = set(d) - known - {"schema_version"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls.build(**{k: v for k, v in d.items() if k != "schema_version"})

    @classmethod
    def from_file(cls, path: str | Path, **overrides: Any) -> "RunConfig":
        """Load a config file; non-None keyword overrides win over file values."""
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)


def write_resolved_config(cfg: RunConfig, out_dir: Path, command: str) -> None:
    payload = {"command": command, **cfg.to_dict()}
    (out_dir / "resolved_config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_images(
    records: Sequence[VURecord], image_root: str | Path, cfg: PreprocessConfig
) -> list[VUImage]:
    """Read and preprocess every record's image, in record order."""
    root = Path(image_root)
    images = []
    for r in records:
        path = Path(r.image_ref)
        if not path.is_absolute():
            path = root / path
        images.append(preprocess_image(path.read_bytes(), cfg))
    return images


def corner_eval_points(
    records: Sequence[VURecord],
    predictions: Mapping[tuple[str, CornerSite], CornerPrediction],
) -> tuple[list[int], list[int], list]:
    """Pair each labeled corner with its prediction; unlabeled corners skip."""
    y_true: list[int] = []
    y_pred: list[int] = []
    dists = []
    for r in records:
        for site in CornerSite:
            truth = r.corner_label(site)
            if truth is None:
                continue
            pred = predictions.get((r.vu_id, site))
            if pred is None:
                raise ReportError(f"no prediction for corner ({r.vu_id!r}, {site.value})")
            y_true.append(int(truth))
            y_pred.append(int(pred.label))
            dists.append(pred.dist)
    return y_true, y_pred, dists


def evaluate_records(
    records: Sequence[VURecord],
    predictions: Mapping[tuple[str, CornerSite], CornerPrediction],
) -> MetricsReport:
    y_true, y_pred, dists = corner_eval_points(records, predictions)
    if not y_true:
        raise ReportError("no labeled corners in the evaluation set")
    return evaluate_corners(y_true, y_pred, dists)


def _prediction_map(
    records: Sequence[VURecord],
    pairs: Sequence[tuple[CornerPrediction, CornerPrediction]],
) -> dict[tuple[str, CornerSite], CornerPrediction]:
    out: dict[tuple[str, CornerSite], CornerPrediction] = {}
    for r, (upper, lower) in zip(records, pairs):
        out[(r.vu_id, CornerSite.UPPER)] = upper
        out[(r.vu_id, CornerSite.LOWER)] = lower
    return out


@dataclass(frozen=True)
class CrossvalResult:
    out_dir: Path
    fold_reports: tuple[MetricsReport, ...]
    table: CrossvalTable


def run_crossval(
    manifest: str | Path,
    image_root: str | Path,
    cfg: RunConfig,
    out_dir: str | Path,
) -> CrossvalResult:
    """Patient-grouped k-fold cross-validation of the full cascade.

    Writes, under ``out_dir``: the resolved config, the fold assignment,
    and per fold a model artifact, a predictions CSV and a report JSON,
    plus the aggregate mean(std) table in CSV, text and JSON form.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = load_manifest(manifest)
    assignment = assign_folds(records, cfg.k, cfg.seed, cfg.stratify)
    write_resolved_config(cfg, out, command="crossval")
    save_assignment(assignment, out / "assignment.csv")

    images = load_images(records, image_root, cfg.preprocess)
    image_of = {r.vu_id: img for r, img in zip(records, images)}

    reports: list[MetricsReport] = []
    for fold in range(cfg.k):
        train_records, test_records = materialize_split(records, assignment, fold)
        fold_dir = out / f"fold_{fold}"
        fold_dir.mkdir(exist_ok=True)
        model = train_cascade(
            train_records,
            [image_of[r.vu_id] for r in train_records],
            cfg.stage1,
            cfg.stage2,
            gate_threshold=cfg.tau,
            preprocess=cfg.preprocess,
        )
        save_cascade(model, fold_dir / "model")
        pairs = predict_corners(model, [image_of[r.vu_id] for r in test_records])
        write_predictions(test_records, pairs, fold_dir / "predictions.csv")
        report = evaluate_records(test_records, _prediction_map(test_records, pairs))
        save_report(report, fold_dir / "report.json")
        reports.append(report)

    table = crossval_aggregate(reports)
    crossval_table_to_csv(table, out / "crossval_table.csv")
    (out / "crossval_table.txt").write_text(render_crossval_table(table), encoding="utf-8")
    (out / "aggregate.json").write_text(
        json.dumps(crossval_table_to_dict(table), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return CrossvalResult(out_dir=out, fold_reports=tuple(reports), table=table)


@dataclass(frozen=True)
class SingleRunResult:
    out_dir: Path
    model: CascadeModel
    report: MetricsReport


def run_single(
    train_manifest: str | Path,
    test_manifest: str | Path,
    train_image_root: str | Path,
    test_image_root: str | Path,
    cfg: RunConfig,
    out_dir: str | Path,
) -> SingleRunResult:
    """Cross-study protocol: fit on one manifest, evaluate on another."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out, command="single")

    train_records = load_manifest(train_manifest)
    model = train_cascade(
        train_records,
        load_images(train_records, train_image_root, cfg.preprocess),
        cfg.stage1,
        cfg.stage2,
        gate_threshold=cfg.tau,
        preprocess=cfg.preprocess,
    )
    save_cascade(model, out / "model")

    test_records = load_manifest(test_manifest)
    pairs = predict_corners(
        model, load_images(test_records, test_image_root, cfg.preprocess)
    )
    write_predictions(test_records, pairs, out / "predictions.csv")
    report = evaluate_records(test_records, _prediction_map(test_records, pairs))
    save_report(report, out / "report.json")
    (out / "report.txt").write_text(render_report_table(report), encoding="utf-8")
    return SingleRunResult(out_dir=out, model=model, report=report)


def train_and_save(
    manifest: str | Path, image_root: str | Path, cfg: RunConfig, out_dir: str | Path
) -> CascadeModel:
    """Fit one cascade on a full manifest and write its artifact."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out, command="train")
    records = load_manifest(manifest)
    model = train_cascade(
        records,
        load_images(records, image_root, cfg.preprocess),
        cfg.stage1,
        cfg.stage2,
        gate_threshold=cfg.tau,
        preprocess=cfg.preprocess,
    )
    save_cascade(model, out / "model")
    return model


def predict_to_csv(
    model_dir: str | Path, manifest: str | Path, image_root: str | Path, out_path: str | Path
) -> None:
    """Load a cascade artifact and write predictions for a manifest."""
    model = load_cascade(Path(model_dir))
    records = load_manifest(manifest)
    pairs = predict_corners(model, load_images(records, image_root, model.preprocess))
    write_predictions(records, pairs, out_path)
