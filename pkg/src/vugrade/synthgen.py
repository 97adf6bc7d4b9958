"""Deterministic synthetic VU corpus with grade-faithful corner geometry.

Each image shows two bright vertebral bodies separated by a dark disc gap.
Grade 1 adds a small notch at the corner, grade 2 a pronounced spur
reaching into the gap, grade 3 a bright bridge spanning it. The upper
corner lives at the anterior (left) end of the junction and the lower
corner at the opposite end, so a pixel-level classifier can tell them
apart. With zero noise the binarized image has one bright connected
component iff any corner is grade 3, and two otherwise.

All randomness derives from (seed, stream, index), so corpus generation
is reproducible and order-independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError
from .preprocessing import VUImage
from .records import MSASSSScore, Region, VURecord, save_manifest

BACKGROUND = 0.06
BINARIZE_THRESHOLD = 0.45

# (width, depth) of the corner feature as fractions of body width / gap height.
# Depths are spaced so grades stay distinct after 32x32 downsampling, and the
# spur never reaches the opposite body even at maximum jitter (0.62 * 1.1 < 0.75).
_FEATURES = {
    MSASSSScore.NORMAL: (0.0, 0.0),
    MSASSSScore.MINOR_LESION: (0.14, 0.28),
    MSASSSScore.SYNDESMOPHYTE: (0.11, 0.62),
    MSASSSScore.BRIDGE: (0.14, 1.0),
}

_PATIENT_STREAM = 11
_SAMPLE_STREAM = 13


@dataclass(frozen=True)
class SyntheticConfig:
    """Corpus-level knobs; see DEFAULT_PREVALENCE for the imbalance profile."""

    n_vus: int
    n_patients: int
    prevalence: tuple[float, float, float, float] = (0.85, 0.05, 0.07, 0.03)
    image_size: tuple[int, int] = (96, 96)
    noise_std: float = 0.02
    rotation_jitter: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_vus < 1:
            raise ValidationError(f"n_vus must be >= 1, got {self.n_vus}")
        if not 1 <= self.n_patients <= self.n_vus:
            raise ValidationError(
                f"n_patients must be in [1, n_vus={self.n_vus}], got {self.n_patients}"
            )
        prev = tuple(float(p) for p in self.prevalence)
        if len(prev) != 4 or any(p < 0 for p in prev):
            raise ValidationError(f"prevalence must be 4 non-negative values, got {prev}")
        if abs(sum(prev) - 1.0) > 1e-9:
            raise ValidationError(f"prevalence must sum to 1, got sum={sum(prev)!r}")
        object.__setattr__(self, "prevalence", prev)
        h, w = self.image_size
        if h < 32 or w < 32:
            raise ValidationError(f"image_size must be at least 32x32, got {self.image_size}")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be >= 0")
        if self.rotation_jitter < 0:
            raise ValidationError("rotation_jitter must be >= 0")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")


@dataclass(frozen=True)
class RenderStyle:
    """Per-sample jitter: patient-level look plus sample-level variation."""

    body_brightness: float = 0.85
    tilt_deg: float = 0.0
    gap_frac: float = 0.19
    feature_scale: float = 1.0
    noise_std: float = 0.0
    noise_seed: int = 0


def render_vu(
    upper: MSASSSScore,
    lower: MSASSSScore,
    style: RenderStyle = RenderStyle(),
    size: tuple[int, int] = (96, 96),
) -> VUImage:
    """Rasterize one VU. Deterministic for identical (labels, style, size)."""
    h, w = size
    ys, xs = np.meshgrid(
        np.arange(h, dtype=np.float64) + 0.5,
        np.arange(w, dtype=np.float64) + 0.5,
        indexing="ij",
    )
    # Sample the axis-aligned scene at inverse-rotated coordinates, which
    # rotates the rendered anatomy by tilt_deg without interpolation blur.
    theta = math.radians(style.tilt_deg)
    cx, cy = w / 2.0, h / 2.0
    dx, dy = xs - cx, ys - cy
    x = math.cos(theta) * dx + math.sin(theta) * dy + cx
    y = -math.sin(theta) * dx + math.cos(theta) * dy + cy

    left, right = 0.12 * w, 0.88 * w
    top, bottom = 0.08 * h, 0.92 * h
    gap = style.gap_frac * h
    gap_top = h / 2.0 - gap / 2.0
    gap_bot = h / 2.0 + gap / 2.0

    in_cols = (x >= left) & (x <= right)
    bright = in_cols & (
        ((y >= top) & (y <= gap_top)) | ((y >= gap_bot) & (y <= bottom))
    )

    # Upper corner feature grows downward from the upper body at the left
    # end of the junction; lower corner grows upward at the right end.
    width_frac, depth_frac = _FEATURES[upper]
    if width_frac > 0:
        fw = width_frac * style.feature_scale * (right - left)
        fd = gap if upper is MSASSSScore.BRIDGE else depth_frac * style.feature_scale * gap
        bright |= (x >= left) & (x <= left + fw) & (y >= gap_top) & (y <= gap_top + fd)
    width_frac, depth_frac = _FEATURES[lower]
    if width_frac > 0:
        fw = width_frac * style.feature_scale * (right - left)
        fd = gap if lower is MSASSSScore.BRIDGE else depth_frac * style.feature_scale * gap
        bright |= (x >= right - fw) & (x <= right) & (y >= gap_bot - fd) & (y <= gap_bot)

    img = np.where(bright, style.body_brightness, BACKGROUND)
    if style.noise_std > 0:
        rng = np.random.default_rng(style.noise_seed)
        img = img + rng.normal(0.0, style.noise_std, size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    return VUImage(pixels=img.astype(np.float32), original_size=(h, w))


def _patient_style(cfg: SyntheticConfig, patient_idx: int) -> tuple[float, float, float]:
    rng = np.random.default_rng((cfg.seed, _PATIENT_STREAM, patient_idx))
    brightness = rng.uniform(0.75, 0.95)
    tilt = rng.uniform(-cfg.rotation_jitter, cfg.rotation_jitter)
    gap_frac = rng.uniform(0.16, 0.22)
    return brightness, tilt, gap_frac


def generate_corpus(cfg: SyntheticConfig, out_dir: str | Path) -> list[VURecord]:
    """Write n_vus labeled PNGs, a manifest, and a provenance file.

    Fully reproducible from cfg.seed: reruns produce byte-identical
    manifests and images. Returns the generated records in manifest order.
    """
    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    patient_styles = [_patient_style(cfg, j) for j in range(cfg.n_patients)]
    prevalence = np.asarray(cfg.prevalence, dtype=np.float64)

    records: list[VURecord] = []
    for i in range(cfg.n_vus):
        patient_idx = i % cfg.n_patients
        brightness, tilt, gap_frac = patient_styles[patient_idx]
        rng = np.random.default_rng((cfg.seed, _SAMPLE_STREAM, i))
        upper = MSASSSScore(int(rng.choice(4, p=prevalence)))
        lower = MSASSSScore(int(rng.choice(4, p=prevalence)))
        style = RenderStyle(
            body_brightness=brightness,
            tilt_deg=tilt,
            gap_frac=gap_frac,
            feature_scale=rng.uniform(0.9, 1.1),
            noise_std=cfg.noise_std,
            noise_seed=int(rng.integers(0, 2**63 - 1)),
        )
        image = render_vu(upper, lower, style, cfg.image_size)

        vu_id = f"vu{i:05d}"
        rel_path = f"images/{vu_id}.png"
        _write_png(image.pixels, out / rel_path)
        records.append(
            VURecord(
                vu_id=vu_id,
                patient_id=f"p{patient_idx:04d}",
                image_ref=rel_path,
                study_id=f"synth-seed{cfg.seed}",
                region=Region.CERVICAL if patient_idx % 2 == 0 else Region.LUMBAR,
                upper_label=upper,
                lower_label=lower,
            )
        )

    save_manifest(records, out / "manifest.csv")
    provenance = {"schema_version": 1, "config": asdict(cfg)}
    (out / "provenance.json").write_text(
        json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return records


def _write_png(pixels: np.ndarray, path: Path) -> None:
    arr = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")
