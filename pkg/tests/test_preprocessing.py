import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from vugrade import DecodeError, PreprocessConfig, ValidationError, preprocess_image
from vugrade.preprocessing import VUImage


def png_bytes(array, mode=None):
    buf = io.BytesIO()
    img = Image.fromarray(array) if mode is None else Image.fromarray(array, mode)
    img.save(buf, format="PNG")
    return buf.getvalue()


def test_constant_image_maps_to_half():
    # min-max on a zero intensity range uses the neutral constant rule
    for value in (0, 128, 255):
        raw = png_bytes(np.full((20, 30), value, dtype=np.uint8))
        out = preprocess_image(raw, PreprocessConfig(target_size=(16, 16)))
        assert np.all(out.pixels == 0.5)


def test_resize_contract():
    raw = png_bytes(np.random.default_rng(0).integers(0, 256, (100, 80), dtype=np.uint8))
    out = preprocess_image(raw, PreprocessConfig(target_size=(224, 224)))
    assert out.shape == (224, 224)
    assert out.original_size == (100, 80)


def test_deterministic_for_identical_bytes():
    raw = png_bytes(np.random.default_rng(1).integers(0, 256, (50, 60), dtype=np.uint8))
    cfg = PreprocessConfig(target_size=(32, 32))
    a = preprocess_image(raw, cfg)
    b = preprocess_image(raw, cfg)
    assert np.array_equal(a.pixels, b.pixels)


def test_undecodable_bytes():
    with pytest.raises(DecodeError):
        preprocess_image(b"definitely not an image", PreprocessConfig())


def test_sixteen_bit_grayscale():
    arr = np.random.default_rng(2).integers(0, 65536, (40, 40), dtype=np.uint16)
    out = preprocess_image(png_bytes(arr), PreprocessConfig(target_size=(32, 32)))
    assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


def test_rgb_input_collapses_to_grayscale():
    arr = np.random.default_rng(3).integers(0, 256, (24, 24, 3), dtype=np.uint8)
    out = preprocess_image(png_bytes(arr), PreprocessConfig(target_size=(24, 24)))
    assert out.pixels.ndim == 2


def test_fixed_mean_std_preserves_absolute_scale():
    raw = png_bytes(np.full((10, 10), 51, dtype=np.uint8))  # 0.2 on the unit scale
    cfg = PreprocessConfig(target_size=(10, 10), normalization="fixed-mean-std")
    out = preprocess_image(raw, cfg)
    assert np.allclose(out.pixels, 0.2, atol=1e-6)
    shifted = PreprocessConfig(
        target_size=(10, 10), normalization="fixed-mean-std", mean=0.1, std=0.5
    )
    out = preprocess_image(raw, shifted)
    assert np.allclose(out.pixels, 0.2, atol=1e-6)  # (0.2 - 0.1) / 0.5


def test_config_validation():
    with pytest.raises(ValidationError):
        PreprocessConfig(target_size=(0, 10))
    with pytest.raises(ValidationError):
        PreprocessConfig(normalization="zscore")
    with pytest.raises(ValidationError):
        PreprocessConfig(std=0.0)


def test_vuimage_rejects_out_of_range():
    with pytest.raises(ValidationError):
        VUImage(pixels=np.full((4, 4), 1.5, dtype=np.float32), original_size=(4, 4))


def test_vuimage_is_read_only():
    img = VUImage(pixels=np.zeros((4, 4), dtype=np.float32), original_size=(4, 4))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1.0


@given(
    h=st.integers(min_value=1, max_value=48),
    w=st.integers(min_value=1, max_value=48),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    norm=st.sampled_from(["min-max", "fixed-mean-std"]),
)
@settings(max_examples=40, deadline=None)
def test_output_range_for_arbitrary_inputs(h, w, seed, norm):
    arr = np.random.default_rng(seed).integers(0, 256, (h, w), dtype=np.uint8)
    cfg = PreprocessConfig(target_size=(20, 20), normalization=norm)
    out = preprocess_image(png_bytes(arr), cfg)
    assert out.shape == (20, 20)
    assert out.pixels.min() >= 0.0
    assert out.pixels.max() <= 1.0
