"""Image decoding, resizing, and intensity normalization for VU crops."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Any

import numpy as np
from PIL import Image

from .errors import DecodeError, ValidationError

NORMALIZATIONS = ("min-max", "fixed-mean-std")

# Modes whose raw intensities span 0..65535.
_SIXTEEN_BIT_MODES = ("I;16", "I;16L", "I;16B", "I;16N", "I")


@dataclass(frozen=True)
class PreprocessConfig:
    """How raw image bytes are turned into model-ready intensity grids.

    ``min-max`` stretches each image to the full [0, 1] range (a constant
    image maps to all 0.5). ``fixed-mean-std`` applies ``(x - mean) / std``
    to the unit-scaled intensities and clips to [0, 1], preserving absolute
    intensity relationships across images.
    """

    target_size: tuple[int, int] = (224, 224)  # (height, width)
    normalization: str = "min-max"
    channel_replication: bool = True
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self) -> None:
        h, w = self.target_size
        if h <= 0 or w <= 0:
            raise ValidationError(f"target_size must be positive, got {self.target_size}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.std <= 0:
            raise ValidationError(f"std must be positive, got {self.std}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "target_size": list(self.target_size),
            "normalization": self.normalization,
            "channel_replication": self.channel_replication,
            "mean": self.mean,
            "std": self.std,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PreprocessConfig":
        return cls(
            target_size=tuple(d["target_size"]),
            normalization=d.get("normalization", "min-max"),
            channel_replication=bool(d.get("channel_replication", True)),
            mean=float(d.get("mean", 0.0)),
            std=float(d.get("std", 1.0)),
        )


@dataclass(frozen=True)
class VUImage:
    """A preprocessed VU crop: 2-D intensities in [0, 1], read-only."""

    pixels: np.ndarray
    original_size: tuple[int, int]  # (height, width) before resizing

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ValidationError(f"pixels must be 2-D, got shape {self.pixels.shape}")
        h, w = self.pixels.shape
        if h <= 0 or w <= 0:
            raise ValidationError(f"image must have positive area, got {h}x{w}")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"intensities must lie in [0, 1], got [{lo}, {hi}]")
        self.pixels.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def _to_gray_float(img: Image.Image) -> tuple[Image.Image, float]:
    """Convert any decodable mode to float grayscale plus its intensity scale."""
    if img.mode in _SIXTEEN_BIT_MODES:
        return img.convert("F"), 65535.0
    if img.mode == "L":
        return img.convert("F"), 255.0
    if img.mode == "F":
        return img, 1.0
    # RGB / RGBA / palette: collapse to 8-bit luminance first.
    return img.convert("L").convert("F"), 255.0


def preprocess_image(raw: bytes, cfg: PreprocessConfig) -> VUImage:
    """Decode image bytes, resize to ``cfg.target_size``, normalize to [0, 1].

    Deterministic: identical bytes always yield bit-identical arrays.
    Raises :class:`DecodeError` for undecodable bytes and
    :class:`ValidationError` for zero-area images.
    """
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise DecodeError(f"could not decode image bytes: {exc}") from exc
    width, height = img.size
    if width == 0 or height == 0:
        raise ValidationError(f"image has zero area ({height}x{width})")

    gray, scale = _to_gray_float(img)
    target_h, target_w = cfg.target_size
    resized = gray.resize((target_w, target_h), Image.BILINEAR)
    arr = np.asarray(resized, dtype=np.float64) / scale
    arr = np.clip(arr, 0.0, 1.0)

    if cfg.normalization == "min-max":
        lo, hi = arr.min(), arr.max()
        if hi > lo:
            arr = (arr - lo) / (hi - lo)
        else:
            arr = np.full_like(arr, 0.5)
    else:  # fixed-mean-std
        arr = np.clip((arr - cfg.mean) / cfg.std, 0.0, 1.0)

    return VUImage(pixels=arr.astype(np.float32), original_size=(height, width))
