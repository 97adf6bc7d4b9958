"""Imbalance-aware multi-class evaluation over the four mSASSS grades.

Everything is computed per corner: a confusion matrix, per-grade
precision / recall / F1 / one-vs-rest AUC, macro / weighted / micro
aggregates, balanced accuracy, and a cross-fold mean(std) table.

Zero-denominator convention: precision, recall and F1 are 0.0 when their
denominator is 0. AUC is the exact pairwise rank statistic (ties credit
0.5) and is absent for a grade with no positives or no negatives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AggregationError, ContractError, ReportError

N_CLASSES = 4

_AVG_ROWS = ("macro", "weighted", "micro")
_METRIC_COLS = ("precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    """4x4 counts; rows are true grades, columns predicted grades."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES):
            raise ContractError(f"confusion matrix must be 4x4, got {counts.shape}")
        if (counts < 0).any():
            raise ContractError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        counts.flags.writeable = False

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    """Count (true, predicted) grade pairs."""
    if len(y_true) != len(y_pred):
        raise ContractError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if len(y_true) == 0:
        raise ContractError("cannot build a confusion matrix from zero corners")
    t = np.asarray([int(v) for v in y_true], dtype=np.int64)
    p = np.asarray([int(v) for v in y_pred], dtype=np.int64)
    if ((t < 0) | (t >= N_CLASSES) | (p < 0) | (p >= N_CLASSES)).any():
        raise ContractError("grades must lie in {0, 1, 2, 3}")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0.0 when both are 0."""
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    """Metrics for one grade; ``auc`` is None when undefined for the eval set."""

    precision: float
    recall: float
    f1: float
    support: int
    auc: float | None = None

    def with_auc(self, auc: float | None) -> "ClassMetrics":
        return replace(self, auc=auc)


def per_class_metrics(cm: ConfusionMatrix) -> tuple[ClassMetrics, ...]:
    """Precision / recall / F1 / support per grade from a confusion matrix."""
    out = []
    for c in range(N_CLASSES):
        tp = int(cm.counts[c, c])
        fp = int(cm.counts[:, c].sum()) - tp
        fn = int(cm.counts[c, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        out.append(
            ClassMetrics(
                precision=precision,
                recall=recall,
                f1=f1_score(precision, recall),
                support=tp + fn,
            )
        )
    return tuple(out)


def auc_from_scores(y_positive: np.ndarray, scores: np.ndarray) -> float | None:
    """Probability that a positive outscores a negative, ties counting 0.5.

    Computed via the rank-sum identity (equivalent to the exhaustive
    pairwise comparison for finite samples). None when either group is empty.
    """
    y_positive = np.asarray(y_positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(y_positive.sum())
    n_neg = int(y_positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[y_positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc_ovr(y_true: Sequence[int], dists: Sequence, cls: int) -> float | None:
    """One-vs-rest AUC of the grade-``cls`` probability over all corners."""
    if len(y_true) != len(dists):
        raise ContractError(f"length mismatch: {len(y_true)} labels vs {len(dists)} distributions")
    scores = np.asarray([d.p[int(cls)] for d in dists], dtype=np.float64)
    positives = np.asarray([int(v) == int(cls) for v in y_true], dtype=bool)
    return auc_from_scores(positives, scores)


@dataclass(frozen=True)
class AverageMetrics:
    precision: float
    recall: float
    f1: float
    auc: float | None = None


@dataclass(frozen=True)
class MetricsReport:
    """Per-grade metrics plus the three standard aggregates.

    ``macro`` averages grades with support > 0 without weighting (its recall
    is the balanced accuracy); ``weighted`` weights by support; ``micro``
    pools decisions, which for single-label evaluation collapses to plain
    accuracy for precision / recall / F1.
    """

    per_class: tuple[ClassMetrics, ...]
    macro: AverageMetrics
    weighted: AverageMetrics
    micro: AverageMetrics
    balanced_accuracy: float
    accuracy: float


def aggregate_report(per_class: Sequence[ClassMetrics]) -> MetricsReport:
    """Build a full report from per-grade metrics.

    Macro rows average only grades with support > 0; weighted rows use
    support weights. Raises :class:`ReportError` when every support is zero.
    """
    if len(per_class) != N_CLASSES:
        raise ContractError(f"expected {N_CLASSES} per-class entries, got {len(per_class)}")
    supports = [m.support for m in per_class]
    total = sum(supports)
    if total == 0:
        raise ReportError("all class supports are zero; nothing was evaluated")
    present = [m for m in per_class if m.support > 0]

    def macro_of(values: list[float]) -> float:
        return float(np.mean(values))

    macro = AverageMetrics(
        precision=macro_of([m.precision for m in present]),
        recall=macro_of([m.recall for m in present]),
        f1=macro_of([m.f1 for m in present]),
        auc=_mean_or_none([m.auc for m in present]),
    )
    weighted = AverageMetrics(
        precision=_support_weighted([m.precision for m in per_class], supports),
        recall=_support_weighted([m.recall for m in per_class], supports),
        f1=_support_weighted([m.f1 for m in per_class], supports),
        auc=_support_weighted_or_none([m.auc for m in per_class], supports),
    )
    # Micro-averaged P/R/F1 all equal accuracy when every corner carries
    # exactly one true and one predicted grade.
    accuracy = weighted.recall
    micro = AverageMetrics(precision=accuracy, recall=accuracy, f1=accuracy, auc=None)
    return MetricsReport(
        per_class=tuple(per_class),
        macro=macro,
        weighted=weighted,
        micro=micro,
        balanced_accuracy=macro.recall,
        accuracy=accuracy,
    )


def _mean_or_none(values: list[float | None]) -> float | None:
    known = [v for v in values if v is not None]
    return float(np.mean(known)) if known else None


def _support_weighted(values: list[float], supports: list[int]) -> float:
    total = sum(supports)
    return float(sum(v * s for v, s in zip(values, supports)) / total)


def _support_weighted_or_none(
    values: list[float | None], supports: list[int]
) -> float | None:
    pairs = [(v, s) for v, s in zip(values, supports) if v is not None and s > 0]
    if not pairs:
        return None
    total = sum(s for _, s in pairs)
    return float(sum(v * s for v, s in pairs) / total)


def evaluate_corners(
    y_true: Sequence[int], y_pred: Sequence[int], dists: Sequence | None = None
) -> MetricsReport:
    """Full evaluation of corner-level predictions.

    ``dists`` (fused 4-class distributions, aligned with the labels) enables
    the AUC columns; without them AUC fields stay None.
    """
    cm = confusion_matrix(y_true, y_pred)
    per_class = per_class_metrics(cm)
    micro_auc = None
    if dists is not None:
        per_class = tuple(
            m.with_auc(roc_auc_ovr(y_true, dists, c)) for c, m in enumerate(per_class)
        )
        micro_auc = _micro_auc(y_true, dists)
    report = aggregate_report(per_class)
    accuracy = cm.accuracy
    return replace(
        report,
        micro=replace(report.micro, auc=micro_auc),
        accuracy=accuracy,
    )


def _micro_auc(y_true: Sequence[int], dists: Sequence) -> float | None:
    """AUC over the pooled one-vs-rest decisions of all four grades."""
    scores = np.concatenate([[d.p[c] for c in range(N_CLASSES)] for d in dists])
    positives = np.concatenate(
        [[int(t) == c for c in range(N_CLASSES)] for t in y_true]
    ).astype(bool)
    return auc_from_scores(positives, scores)


# --- report serialization ---------------------------------------------------


def report_to_dict(report: MetricsReport) -> dict:
    def avg(m: AverageMetrics) -> dict:
        return {"precision": m.precision, "recall": m.recall, "f1": m.f1, "auc": m.auc}

    return {
        "schema_version": 1,
        "per_class": [
            {
                "class": c,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "auc": m.auc,
                "support": m.support,
            }
            for c, m in enumerate(report.per_class)
        ],
        "macro": avg(report.macro),
        "weighted": avg(report.weighted),
        "micro": avg(report.micro),
        "balanced_accuracy": report.balanced_accuracy,
        "accuracy": report.accuracy,
    }


def report_from_dict(d: dict) -> MetricsReport:
    def avg(a: dict) -> AverageMetrics:
        return AverageMetrics(
            precision=a["precision"], recall=a["recall"], f1=a["f1"], auc=a.get("auc")
        )

    per_class = tuple(
        ClassMetrics(
            precision=e["precision"],
            recall=e["recall"],
            f1=e["f1"],
            support=e["support"],
            auc=e.get("auc"),
        )
        for e in sorted(d["per_class"], key=lambda e: e["class"])
    )
    return MetricsReport(
        per_class=per_class,
        macro=avg(d["macro"]),
        weighted=avg(d["weighted"]),
        micro=avg(d["micro"]),
        balanced_accuracy=d["balanced_accuracy"],
        accuracy=d["accuracy"],
    )


def save_report(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_report(path: str | Path) -> MetricsReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def render_report_table(report: MetricsReport) -> str:
    """Single-run table: one row per grade plus the aggregate rows."""
    header = f"{'mSASSS':<12} {'Precision':>10} {'Recall':>10} {'F1-score':>10} {'AUC(ROC)':>10} {'Support':>8}"
    lines = [header, "-" * len(header)]
    for c, m in enumerate(report.per_class):
        lines.append(
            f"{c:<12} {m.precision:>10.3f} {m.recall:>10.3f} {m.f1:>10.3f} "
            f"{_fmt_opt(m.auc):>10} {m.support:>8}"
        )
    total = sum(m.support for m in report.per_class)
    for name, avg in (("macro", report.macro), ("weighted", report.weighted), ("micro", report.micro)):
        lines.append(
            f"{name + ' avg':<12} {avg.precision:>10.3f} {avg.recall:>10.3f} {avg.f1:>10.3f} "
            f"{_fmt_opt(avg.auc):>10} {total:>8}"
        )
    lines.append(f"{'balanced accuracy':<24} {report.balanced_accuracy:.3f}")
    lines.append(f"{'accuracy':<24} {report.accuracy:.3f}")
    return "\n".join(lines) + "\n"


def _fmt_opt(v: float | None) -> str:
    return "-" if v is None else f"{v:.3f}"


# --- cross-fold aggregation -------------------------------------------------


@dataclass(frozen=True)
class CrossvalTable:
    """Mean and population std per (row, metric) cell across folds.

    Rows are the four grades, the three averages, and the two scalar
    summary rows (balanced_accuracy / accuracy, stored under "recall").
    """

    n_folds: int
    cells: dict[tuple[str, str], tuple[float, float]]

    @property
    def rows(self) -> tuple[str, ...]:
        return tuple(str(c) for c in range(N_CLASSES)) + _AVG_ROWS + (
            "balanced_accuracy",
            "accuracy",
        )


def crossval_aggregate(fold_reports: Sequence[MetricsReport]) -> CrossvalTable:
    """Arithmetic mean and population std of every cell across folds."""
    if len(fold_reports) < 2:
        raise AggregationError(f"need at least 2 fold reports, got {len(fold_reports)}")

    cells: dict[tuple[str, str], tuple[float, float]] = {}

    def put(row: str, col: str, values: list[float | None]) -> None:
        known = [v for v in values if v is not None]
        if not known:
            return
        arr = np.asarray(known, dtype=np.float64)
        # identical folds have exactly zero spread; np.std would leak rounding
        std = 0.0 if arr.min() == arr.max() else float(arr.std())
        cells[(row, col)] = (float(arr.mean()), std)

    for c in range(N_CLASSES):
        for col in _METRIC_COLS:
            put(str(c), col, [getattr(r.per_class[c], col) for r in fold_reports])
        put(str(c), "support", [float(r.per_class[c].support) for r in fold_reports])
    for row in _AVG_ROWS:
        for col in _METRIC_COLS:
            put(row, col, [getattr(getattr(r, row), col) for r in fold_reports])
    put("balanced_accuracy", "recall", [r.balanced_accuracy for r in fold_reports])
    put("accuracy", "recall", [r.accuracy for r in fold_reports])
    return CrossvalTable(n_folds=len(fold_reports), cells=cells)


def format_cell(mean: float, std: float) -> str:
    """Render one aggregate cell as ``0.934(0.010)``."""
    return f"{mean:.3f}({std:.3f})"


def render_crossval_table(table: CrossvalTable) -> str:
    """Text table of per-grade and aggregate rows in mean(std) form."""
    header = f"{'mSASSS':<20} {'Precision':>14} {'Recall':>14} {'F1-score':>14} {'AUC(ROC)':>14}"
    lines = [header, "-" * len(header)]
    for row in table.rows:
        rendered = [
            format_cell(*table.cells[(row, col)]) if (row, col) in table.cells else "-"
            for col in _METRIC_COLS
        ]
        label = {"balanced_accuracy": "balanced accuracy", "accuracy": "accuracy"}.get(
            row, row if row.isdigit() else f"{row} avg"
        )
        lines.append(
            f"{label:<20} {rendered[0]:>14} {rendered[1]:>14} {rendered[2]:>14} {rendered[3]:>14}"
        )
    return "\n".join(lines) + "\n"


def crossval_table_to_csv(table: CrossvalTable, path: str | Path) -> None:
    """Wide CSV mirroring the text table, cells in mean(std) form."""
    lines = ["row,precision,recall,f1,auc"]
    for row in table.rows:
        cols = [
            format_cell(*table.cells[(row, col)]) if (row, col) in table.cells else ""
            for col in _METRIC_COLS
        ]
        lines.append(",".join([row] + cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def crossval_table_to_dict(table: CrossvalTable) -> dict:
    return {
        "schema_version": 1,
        "n_folds": table.n_folds,
        "cells": {
            f"{row}/{col}": {"mean": mean, "std": std}
            for (row, col), (mean, std) in sorted(table.cells.items())
        },
    }
