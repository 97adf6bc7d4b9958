"""Deterministic baseline backend: multinomial logistic regression.

Images are pooled down to 32x32 intensity features, standardized with
train-set statistics, and each head gets its own softmax layer trained
by full-batch Adam from a zero initialization. No randomness anywhere,
so identical inputs always produce bit-identical parameters.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from ..preprocessing import PreprocessConfig, VUImage
from .base import (
    ClassifierSpec,
    TrainedClassifier,
    check_images,
    class_weights,
    load_arrays,
    read_model_metadata,
    save_arrays,
    validate_training_inputs,
    write_model_metadata,
)

FEATURE_SHAPE = (32, 32)
L2_PENALTY = 1e-4
_ADAM_BETA1, _ADAM_BETA2, _ADAM_EPS = 0.9, 0.999, 1e-8


def _downsample(pixels: np.ndarray) -> np.ndarray:
    h, w = pixels.shape
    th, tw = FEATURE_SHAPE
    a = pixels.astype(np.float64)
    if h % th == 0 and w % tw == 0:
        return a.reshape(th, h // th, tw, w // tw).mean(axis=(1, 3))
    resized = Image.fromarray(pixels.astype(np.float32), mode="F").resize(
        (tw, th), Image.BILINEAR
    )
    return np.asarray(resized, dtype=np.float64)


def _features(images: Sequence[VUImage]) -> np.ndarray:
    return np.stack([_downsample(img.pixels).ravel() for img in images])


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _row_logits(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    # Per-row 1-D dot products: keeps batched and one-by-one prediction
    # bit-identical (2-D matmul may pick a different BLAS reduction order).
    out = np.empty((x.shape[0], weights.shape[0]), dtype=np.float64)
    for i in range(x.shape[0]):
        for c in range(weights.shape[0]):
            out[i, c] = x[i] @ weights[c] + bias[c]
    return out


def _fit_head(
    x: np.ndarray, y: np.ndarray, n_classes: int, spec: ClassifierSpec, head: int
) -> tuple[np.ndarray, np.ndarray]:
    n, dim = x.shape
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    sample_w = class_weights(y, n_classes, spec.class_weighting, head)[y]
    sample_w = sample_w / sample_w.mean()

    weights = np.zeros((n_classes, dim), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)
    m_w = np.zeros_like(weights)
    v_w = np.zeros_like(weights)
    m_b = np.zeros_like(bias)
    v_b = np.zeros_like(bias)
    for t in range(1, spec.iterations + 1):
        probs = _softmax(x @ weights.T + bias)
        grad_out = (probs - onehot) * (sample_w / n)[:, None]
        g_w = grad_out.T @ x + L2_PENALTY * weights
        g_b = grad_out.sum(axis=0)

        m_w = _ADAM_BETA1 * m_w + (1 - _ADAM_BETA1) * g_w
        v_w = _ADAM_BETA2 * v_w + (1 - _ADAM_BETA2) * g_w**2
        m_b = _ADAM_BETA1 * m_b + (1 - _ADAM_BETA1) * g_b
        v_b = _ADAM_BETA2 * v_b + (1 - _ADAM_BETA2) * g_b**2
        correction = np.sqrt(1 - _ADAM_BETA2**t) / (1 - _ADAM_BETA1**t)
        weights -= spec.learning_rate * correction * m_w / (np.sqrt(v_w) + _ADAM_EPS)
        bias -= spec.learning_rate * correction * m_b / (np.sqrt(v_b) + _ADAM_EPS)
    return weights, bias


class BaselineClassifier(TrainedClassifier):
    def __init__(
        self,
        spec: ClassifierSpec,
        preprocess: PreprocessConfig,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        feat_mean: np.ndarray,
        feat_std: np.ndarray,
    ):
        self.spec = spec
        self.preprocess = preprocess
        self._weights = weights
        self._biases = biases
        self._feat_mean = feat_mean
        self._feat_std = feat_std

    @classmethod
    def train(
        cls,
        images: Sequence[VUImage],
        targets: np.ndarray,
        spec: ClassifierSpec,
        preprocess: PreprocessConfig,
    ) -> "BaselineClassifier":
        targets = validate_training_inputs(images, targets, spec, preprocess)
        x = _features(images)
        feat_mean = x.mean(axis=0)
        feat_std = np.maximum(x.std(axis=0), 1e-8)
        xs = (x - feat_mean) / feat_std

        n_classes = spec.classes_per_head
        weights, biases = [], []
        for h in range(spec.n_heads):
            present = targets[:, h] >= 0
            w, b = _fit_head(xs[present], targets[present, h], n_classes, spec, h)
            weights.append(w)
            biases.append(b)
        return cls(spec, preprocess, weights, biases, feat_mean, feat_std)

    def predict_dist(self, images: Sequence[VUImage]) -> np.ndarray:
        check_images(images, self.preprocess)
        xs = (_features(images) - self._feat_mean) / self._feat_std
        out = np.empty((len(images), self.spec.n_heads, self.spec.classes_per_head))
        for h in range(self.spec.n_heads):
            out[:, h, :] = _softmax(_row_logits(xs, self._weights[h], self._biases[h]))
        return out

    def save(self, model_dir: Path) -> None:
        model_dir = Path(model_dir)
        write_model_metadata(model_dir, self.spec, self.preprocess)
        arrays = {"feat_mean": self._feat_mean, "feat_std": self._feat_std}
        for h in range(self.spec.n_heads):
            arrays[f"weights_{h}"] = self._weights[h]
            arrays[f"bias_{h}"] = self._biases[h]
        save_arrays(model_dir / "params.npz", arrays)

    @classmethod
    def load(cls, model_dir: Path) -> "BaselineClassifier":
        model_dir = Path(model_dir)
        spec, preprocess = read_model_metadata(model_dir)
        arrays = load_arrays(model_dir / "params.npz")
        weights = [arrays[f"weights_{h}"] for h in range(spec.n_heads)]
        biases = [arrays[f"bias_{h}"] for h in range(spec.n_heads)]
        return cls(spec, preprocess, weights, biases, arrays["feat_mean"], arrays["feat_std"])
