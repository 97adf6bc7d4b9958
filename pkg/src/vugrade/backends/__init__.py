"""Classifier backends: a deterministic baseline and a deep transfer model."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..preprocessing import PreprocessConfig, VUImage
from .base import ClassifierSpec, TrainedClassifier, read_model_metadata

__all__ = [
    "ClassifierSpec",
    "TrainedClassifier",
    "fit",
    "load_model",
    "save_model",
]


def fit(
    images: Sequence[VUImage],
    targets: np.ndarray,
    spec: ClassifierSpec,
    preprocess: PreprocessConfig,
) -> TrainedClassifier:
    """Train a classifier of the requested kind; see ClassifierSpec."""
    if spec.kind == "baseline":
        from .baseline import BaselineClassifier

        return BaselineClassifier.train(images, targets, spec, preprocess)
    from .deep import DeepClassifier

    return DeepClassifier.train(images, targets, spec, preprocess)


def save_model(model: TrainedClassifier, model_dir: str | Path) -> None:
    model.save(Path(model_dir))


def load_model(model_dir: str | Path) -> TrainedClassifier:
    """Reload a saved model; the artifact records its own backend kind."""
    model_dir = Path(model_dir)
    spec, _ = read_model_metadata(model_dir)
    if spec.kind == "baseline":
        from .baseline import BaselineClassifier

        return BaselineClassifier.load(model_dir)
    if spec.kind == "deep":
        from .deep import DeepClassifier

        return DeepClassifier.load(model_dir)
    raise ValidationError(f"unknown backend kind {spec.kind!r}")
