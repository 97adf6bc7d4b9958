"""Shared classifier contract for the two cascade stages.

A classifier is trained on preprocessed VU images against one or more
heads (the gate has one 2-class head, the grader two 3-class heads).
Targets are an ``(n, n_heads)`` integer array where -1 marks an absent
label; masked labels contribute nothing to the loss.
"""

from __future__ import annotations

import io
import json
import warnings
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..errors import ContractError, TrainingError, ValidationError
from ..preprocessing import PreprocessConfig, VUImage

KINDS = ("baseline", "deep")
WEIGHTINGS = ("none", "inverse-frequency")

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassifierSpec:
    """Training recipe for one stage.

    ``n_outputs`` is the total logit count: 2 for the bridge gate, 6 for
    the two-headed corner grader (2 heads x 3 grades). ``iterations``
    means optimizer steps for the baseline backend and epochs for the
    deep one. ``pretrained`` / ``train_all_layers`` only affect the deep
    backend.
    """

    kind: str
    n_outputs: int
    n_heads: int = 1
    iterations: int = 400
    learning_rate: float = 0.05
    seed: int = 0
    class_weighting: str = "none"
    pretrained: bool = True
    train_all_layers: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_heads < 1:
            raise ValidationError(f"n_heads must be >= 1, got {self.n_heads}")
        if self.n_outputs % self.n_heads != 0 or self.n_outputs // self.n_heads < 2:
            raise ValidationError(
                f"n_outputs={self.n_outputs} must split into n_heads={self.n_heads} "
                "heads of at least 2 classes each"
            )
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.class_weighting not in WEIGHTINGS:
            raise ValidationError(
                f"class_weighting must be one of {WEIGHTINGS}, got {self.class_weighting!r}"
            )

    @property
    def classes_per_head(self) -> int:
        return self.n_outputs // self.n_heads

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "n_outputs": self.n_outputs,
            "n_heads": self.n_heads,
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "class_weighting": self.class_weighting,
            "pretrained": self.pretrained,
            "train_all_layers": self.train_all_layers,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClassifierSpec":
        return cls(
            kind=d["kind"],
            n_outputs=int(d["n_outputs"]),
            n_heads=int(d.get("n_heads", 1)),
            iterations=int(d.get("iterations", 400)),
            learning_rate=float(d.get("learning_rate", 0.05)),
            seed=int(d.get("seed", 0)),
            class_weighting=d.get("class_weighting", "none"),
            pretrained=bool(d.get("pretrained", True)),
            train_all_layers=bool(d.get("train_all_layers", False)),
        )


class TrainedClassifier:
    """A fitted stage model: immutable, batch-predicting, reloadable."""

    spec: ClassifierSpec
    preprocess: PreprocessConfig

    def predict_dist(self, images: Sequence[VUImage]) -> np.ndarray:
        """Per-image, per-head probability vectors, shape (n, n_heads, classes)."""
        raise NotImplementedError

    def save(self, model_dir: Path) -> None:
        raise NotImplementedError


def check_images(images: Sequence[VUImage], preprocess: PreprocessConfig) -> None:
    for i, img in enumerate(images):
        if img.shape != tuple(preprocess.target_size):
            raise ContractError(
                f"image {i} has shape {img.shape}, model expects {tuple(preprocess.target_size)}"
            )


def check_targets(targets: np.ndarray, spec: ClassifierSpec, n_images: int) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape != (n_images, spec.n_heads):
        raise ContractError(
            f"targets must have shape ({n_images}, {spec.n_heads}), got {targets.shape}"
        )
    bad = (targets < -1) | (targets >= spec.classes_per_head)
    if bad.any():
        raise ContractError(
            f"labels must be -1 (absent) or in [0, {spec.classes_per_head}), "
            f"got {sorted(set(targets[bad].tolist()))}"
        )
    return targets


def class_weights(labels: np.ndarray, n_classes: int, weighting: str, head: int) -> np.ndarray:
    """Per-class loss weights; inverse-frequency falls back when a class is absent."""
    counts = np.bincount(labels, minlength=n_classes)
    if weighting == "inverse-frequency":
        if (counts == 0).any():
            missing = [int(c) for c in np.flatnonzero(counts == 0)]
            warnings.warn(
                f"head {head}: classes {missing} have no examples; "
                "falling back to unweighted loss",
                stacklevel=2,
            )
        else:
            return counts.sum() / (n_classes * counts.astype(np.float64))
    return np.ones(n_classes, dtype=np.float64)


def validate_training_inputs(
    images: Sequence[VUImage], targets: np.ndarray, spec: ClassifierSpec,
    preprocess: PreprocessConfig,
) -> np.ndarray:
    if len(images) == 0:
        raise TrainingError("empty training set")
    targets = check_targets(targets, spec, len(images))
    check_images(images, preprocess)
    for h in range(spec.n_heads):
        if not (targets[:, h] >= 0).any():
            raise TrainingError(f"head {h} has no labeled examples")
    return targets


# --- deterministic array archive ---------------------------------------------
# np.savez stamps zip entries with the current time, which breaks
# byte-identical reruns; write npz-compatible archives with a fixed epoch.

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_arrays(path: Path, arrays: dict[str, np.ndarray]) -> None:
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, arrays[name], allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH), buf.getvalue())


def load_arrays(path: Path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with zipfile.ZipFile(path, "r") as zf:
        for name in zf.namelist():
            out[name.removesuffix(".npy")] = np.load(
                io.BytesIO(zf.read(name)), allow_pickle=False
            )
    return out


def write_model_metadata(model_dir: Path, spec: ClassifierSpec, preprocess: PreprocessConfig) -> None:
    model_dir.mkdir(parents=True, exist_ok=True)
    (model_dir / "spec.json").write_text(
        json.dumps({"format_version": FORMAT_VERSION, "spec": spec.to_dict()},
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (model_dir / "preprocess.json").write_text(
        json.dumps(preprocess.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_model_metadata(model_dir: Path) -> tuple[ClassifierSpec, PreprocessConfig]:
    meta = json.loads((model_dir / "spec.json").read_text(encoding="utf-8"))
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"{model_dir}: unsupported model format version {version!r}"
        )
    spec = ClassifierSpec.from_dict(meta["spec"])
    preprocess = PreprocessConfig.from_dict(
        json.loads((model_dir / "preprocess.json").read_text(encoding="utf-8"))
    )
    return spec, preprocess
