"""The two-step grading pipeline: bridge gate, corner grader, fusion.

Stage 1 decides per VU whether a bony bridge (grade 3) is present; stage 2
grades both corners over {0, 1, 2}. The stages are trained independently
and share no parameters. Stage 2 always runs, so every corner carries a
full fused 4-grade distribution even when the gate fires.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import backends
from .backends import ClassifierSpec, TrainedClassifier
from .errors import (
    ConfigurationError,
    ContractError,
    LabelingError,
    TrainingError,
    ValidationError,
)
from .preprocessing import PreprocessConfig, VUImage
from .records import CornerSite, MSASSSScore, VURecord

FORMAT_VERSION = 1
STAGE2_CLASSES = 3
# Stage-1 head layout: index 0 = no bridge, index 1 = bridge.
BRIDGE_INDEX = 1


@dataclass(frozen=True)
class ScoreDistribution:
    """Probability vector over the four mSASSS grades."""

    p: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        p = tuple(float(v) for v in self.p)
        if len(p) != 4:
            raise ValidationError(f"distribution needs 4 entries, got {len(p)}")
        if any(v < 0 for v in p):
            raise ValidationError(f"probabilities must be non-negative, got {p}")
        if abs(sum(p) - 1.0) > 1e-9:
            raise ValidationError(f"probabilities must sum to 1, got {sum(p)!r}")
        object.__setattr__(self, "p", p)

    def top_class(self) -> MSASSSScore:
        return MSASSSScore(int(np.argmax(self.p)))


@dataclass(frozen=True)
class CornerPrediction:
    site: CornerSite
    label: MSASSSScore
    dist: ScoreDistribution


@dataclass(frozen=True)
class CascadeModel:
    """Trained gate + grader plus the routing threshold and input contract."""

    stage1: TrainedClassifier
    stage2: TrainedClassifier
    gate_threshold: float
    preprocess: PreprocessConfig

    def __post_init__(self) -> None:
        if not 0.0 < self.gate_threshold < 1.0:
            raise ConfigurationError(
                f"gate threshold must lie in (0, 1), got {self.gate_threshold}"
            )
        s1, s2 = self.stage1.spec, self.stage2.spec
        if (s1.n_heads, s1.n_outputs) != (1, 2):
            raise ConfigurationError(
                f"stage 1 must be a single 2-class head, got {s1.n_heads}x{s1.classes_per_head}"
            )
        if (s2.n_heads, s2.classes_per_head) != (2, STAGE2_CLASSES):
            raise ConfigurationError(
                f"stage 2 must be two {STAGE2_CLASSES}-class heads, "
                f"got {s2.n_heads}x{s2.classes_per_head}"
            )


def derive_stage1_label(record: VURecord) -> bool:
    """True iff any present corner of the VU is graded 3 (bony bridge)."""
    labels = record.present_labels
    if not labels:
        raise LabelingError(f"record {record.vu_id!r} has no corner labels")
    return max(labels) == MSASSSScore.BRIDGE


def select_stage2_training(
    records: Sequence[VURecord],
) -> tuple[list[VURecord], np.ndarray]:
    """Keep VUs gradeable by stage 2 and build masked per-corner targets.

    VUs with any corner graded 3 are excluded entirely (stage-2 targets
    stay within {0, 1, 2}); VUs with no labels at all are dropped too.
    Returns (kept_records, targets) with targets shaped (n, 2) and -1
    marking an absent corner label.
    """
    kept: list[VURecord] = []
    rows: list[tuple[int, int]] = []
    for r in records:
        labels = r.present_labels
        if not labels or MSASSSScore.BRIDGE in labels:
            continue
        kept.append(r)
        rows.append(
            (
                -1 if r.upper_label is None else int(r.upper_label),
                -1 if r.lower_label is None else int(r.lower_label),
            )
        )
    targets = np.asarray(rows, dtype=np.int64).reshape(len(kept), 2)
    return kept, targets


def fuse_distribution(p_bridge: float, stage2_head: Sequence[float]) -> ScoreDistribution:
    """Combine the gate and grader outputs into one 4-grade distribution.

    P(3) = p_bridge and P(c) = (1 - p_bridge) * q(c) for c in {0, 1, 2},
    the law of total probability over the bridge event.
    """
    if not 0.0 <= p_bridge <= 1.0:
        raise ContractError(f"p_bridge must lie in [0, 1], got {p_bridge}")
    q = np.asarray(stage2_head, dtype=np.float64)
    if q.shape != (STAGE2_CLASSES,):
        raise ContractError(f"stage2_head must have 3 entries, got shape {q.shape}")
    if (q < 0).any() or abs(q.sum() - 1.0) > 1e-6:
        raise ContractError(
            f"stage2_head must be a probability vector (sum within 1e-6 of 1), got {q.tolist()}"
        )
    q = q / q.sum()
    rest = 1.0 - p_bridge
    return ScoreDistribution((rest * q[0], rest * q[1], rest * q[2], p_bridge))


def train_cascade(
    records: Sequence[VURecord],
    images: Sequence[VUImage],
    stage1_spec: ClassifierSpec,
    stage2_spec: ClassifierSpec,
    gate_threshold: float = 0.5,
    preprocess: PreprocessConfig | None = None,
) -> CascadeModel:
    """Fit both stages independently on their derived label sets.

    ``images`` must align 1:1 with ``records`` (already preprocessed).
    Raises :class:`TrainingError` naming the stage whose training set is
    unusable (empty, or a single-class gate).
    """
    if len(records) != len(images):
        raise ContractError(f"{len(records)} records vs {len(images)} images")
    if preprocess is None:
        preprocess = PreprocessConfig()

    labeled = [(r, img) for r, img in zip(records, images) if r.present_labels]
    if not labeled:
        raise TrainingError("stage 1 training set is empty (no labeled VUs)")
    gate_targets = np.asarray(
        [[int(derive_stage1_label(r))] for r, _ in labeled], dtype=np.int64
    )
    if len(np.unique(gate_targets)) < 2:
        raise TrainingError(
            "stage 1 needs both bridge and non-bridge VUs; "
            f"got only class {int(gate_targets[0, 0])}"
        )
    try:
        stage1 = backends.fit(
            [img for _, img in labeled], gate_targets, stage1_spec, preprocess
        )
    except TrainingError as exc:
        raise TrainingError(f"stage 1: {exc}") from exc

    image_by_id = {r.vu_id: img for r, img in zip(records, images)}
    stage2_records, stage2_targets = select_stage2_training([r for r, _ in labeled])
    if not stage2_records:
        raise TrainingError("stage 2 training set is empty (no VUs graded <= 2)")
    try:
        stage2 = backends.fit(
            [image_by_id[r.vu_id] for r in stage2_records], stage2_targets, stage2_spec, preprocess
        )
    except TrainingError as exc:
        raise TrainingError(f"stage 2: {exc}") from exc
    return CascadeModel(
        stage1=stage1, stage2=stage2, gate_threshold=gate_threshold, preprocess=preprocess
    )


def _corner_prediction(
    site: CornerSite, p_bridge: float, head: np.ndarray, gate_threshold: float
) -> CornerPrediction:
    fused = fuse_distribution(p_bridge, head)
    if p_bridge >= gate_threshold:
        label = MSASSSScore.BRIDGE
    else:
        label = MSASSSScore(int(np.argmax(head)))
    return CornerPrediction(site=site, label=label, dist=fused)


def predict_corners(
    model: CascadeModel, images: Sequence[VUImage]
) -> list[tuple[CornerPrediction, CornerPrediction]]:
    """Batch prediction: one (upper, lower) pair per image, input order kept."""
    if len(images) == 0:
        return []
    gate = model.stage1.predict_dist(images)
    grader = model.stage2.predict_dist(images)
    out = []
    for i in range(len(images)):
        p_bridge = float(gate[i, 0, BRIDGE_INDEX])
        out.append(
            (
                _corner_prediction(
                    CornerSite.UPPER, p_bridge, grader[i, 0], model.gate_threshold
                ),
                _corner_prediction(
                    CornerSite.LOWER, p_bridge, grader[i, 1], model.gate_threshold
                ),
            )
        )
    return out


def predict_vu(model: CascadeModel, image: VUImage) -> tuple[CornerPrediction, CornerPrediction]:
    """Grade both corners of one VU."""
    return predict_corners(model, [image])[0]


# --- cascade artifact ---------------------------------------------------------


def save_cascade(model: CascadeModel, out_dir: str | Path) -> None:
    """Write the artifact: stage1/, stage2/, and cascade.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backends.save_model(model.stage1, out_dir / "stage1")
    backends.save_model(model.stage2, out_dir / "stage2")
    meta = {
        "format_version": FORMAT_VERSION,
        "gate_threshold": model.gate_threshold,
        "preprocess": model.preprocess.to_dict(),
        "backends": {"stage1": model.stage1.spec.kind, "stage2": model.stage2.spec.kind},
    }
    (out_dir / "cascade.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_cascade(model_dir: str | Path) -> CascadeModel:
    model_dir = Path(model_dir)
    meta = json.loads((model_dir / "cascade.json").read_text(encoding="utf-8"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"{model_dir}: unsupported cascade format version {meta.get('format_version')!r}"
        )
    return CascadeModel(
        stage1=backends.load_model(model_dir / "stage1"),
        stage2=backends.load_model(model_dir / "stage2"),
        gate_threshold=float(meta["gate_threshold"]),
        preprocess=PreprocessConfig.from_dict(meta["preprocess"]),
    )


# --- prediction CSV -----------------------------------------------------------

PREDICTION_COLUMNS = ("vu_id", "site", "predicted", "p0", "p1", "p2", "p3")


def write_predictions(
    records: Sequence[VURecord],
    predictions: Sequence[tuple[CornerPrediction, CornerPrediction]],
    path: str | Path,
) -> None:
    """Two CSV rows per VU (upper then lower) with the fused distributions."""
    if len(records) != len(predictions):
        raise ContractError(f"{len(records)} records vs {len(predictions)} predictions")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTION_COLUMNS)
        for record, pair in zip(records, predictions):
            for pred in pair:
                writer.writerow(
                    [record.vu_id, pred.site.value, int(pred.label)]
                    + [f"{v:.12g}" for v in pred.dist.p]
                )


def load_predictions(path: str | Path) -> dict[tuple[str, CornerSite], CornerPrediction]:
    """Read a predictions CSV back into (vu_id, site) -> CornerPrediction."""
    out: dict[tuple[str, CornerSite], CornerPrediction] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            site = CornerSite(row["site"])
            p = tuple(float(row[f"p{c}"]) for c in range(4))
            total = sum(p)
            dist = ScoreDistribution(tuple(v / total for v in p))
            out[(row["vu_id"], site)] = CornerPrediction(
                site=site, label=MSASSSScore(int(row["predicted"])), dist=dist
            )
    return out
