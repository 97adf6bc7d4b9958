import numpy as np
import pytest

from vugrade import SyntheticConfig, generate_corpus
from vugrade.preprocessing import VUImage


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A small on-disk corpus shared by training / CLI tests."""
    out = tmp_path_factory.mktemp("tiny-corpus")
    cfg = SyntheticConfig(n_vus=120, n_patients=12, seed=5)
    records = generate_corpus(cfg, out)
    return out, records, cfg


@pytest.fixture(scope="session")
def big_corpus(tmp_path_factory):
    """The acceptance-scale corpus: 2000 VUs, fixed seed, clinical-grade imbalance."""
    out = tmp_path_factory.mktemp("big-corpus")
    cfg = SyntheticConfig(
        n_vus=2000, n_patients=200, prevalence=(0.85, 0.05, 0.07, 0.03), seed=20260809
    )
    records = generate_corpus(cfg, out)
    return out, records, cfg


def make_image(shape=(64, 64), fill=0.5, rng=None):
    if rng is None:
        pixels = np.full(shape, fill, dtype=np.float32)
    else:
        pixels = rng.random(shape).astype(np.float32)
    return VUImage(pixels=pixels, original_size=shape)
