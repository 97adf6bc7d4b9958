import numpy as np
import pytest

from vugrade import ClassifierSpec, ContractError, TrainingError, fit, load_model, save_model
from vugrade.preprocessing import PreprocessConfig, VUImage

PP = PreprocessConfig(target_size=(32, 32), channel_replication=False)


def toy_image(rng, bright_left):
    """Linearly separable toy: class decided by which half is bright."""
    pixels = rng.uniform(0.0, 0.25, (32, 32))
    if bright_left:
        pixels[:, :16] += 0.6
    else:
        pixels[:, 16:] += 0.6
    return VUImage(pixels=np.clip(pixels, 0, 1).astype(np.float32), original_size=(32, 32))


def separable_set(n=200, seed=0):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for i in range(n):
        label = i % 2
        images.append(toy_image(rng, bright_left=label == 0))
        labels.append([label])
    return images, np.asarray(labels)


def binary_spec(**kwargs):
    defaults = dict(kind="baseline", n_outputs=2, n_heads=1, iterations=150, learning_rate=0.05)
    defaults.update(kwargs)
    return ClassifierSpec(**defaults)


def test_separable_set_reaches_high_training_accuracy():
    images, labels = separable_set(200)
    model = fit(images, labels, binary_spec(), PP)
    dist = model.predict_dist(images)
    predicted = dist[:, 0, :].argmax(axis=1)
    accuracy = (predicted == labels[:, 0]).mean()
    assert accuracy >= 0.95


def test_identical_runs_serialize_identically(tmp_path):
    images, labels = separable_set(60)
    spec = binary_spec(seed=7)
    model_a = fit(images, labels, spec, PP)
    model_b = fit(images, labels, spec, PP)
    save_model(model_a, tmp_path / "a")
    save_model(model_b, tmp_path / "b")
    assert (tmp_path / "a" / "params.npz").read_bytes() == (
        tmp_path / "b" / "params.npz"
    ).read_bytes()


def test_single_class_training_predicts_that_class():
    rng = np.random.default_rng(3)
    images = [toy_image(rng, bright_left=bool(i % 2)) for i in range(30)]
    labels = np.ones((30, 1), dtype=int)
    model = fit(images, labels, binary_spec(), PP)
    dist = model.predict_dist(images)
    assert (dist[:, 0, :].argmax(axis=1) == 1).all()


def test_distributions_normalized():
    images, labels = separable_set(40)
    model = fit(images, labels, binary_spec(), PP)
    dist = model.predict_dist(images)
    assert (dist >= 0).all()
    assert np.abs(dist.sum(axis=2) - 1.0).max() <= 1e-6


def test_batch_equals_one_by_one():
    images, labels = separable_set(30)
    model = fit(images, labels, binary_spec(), PP)
    batched = model.predict_dist(images)
    single = np.concatenate([model.predict_dist([img]) for img in images])
    assert np.array_equal(batched, single)


def test_save_load_round_trip_is_exact(tmp_path):
    images, labels = separable_set(50)
    model = fit(images, labels, binary_spec(), PP)
    save_model(model, tmp_path / "model")
    reloaded = load_model(tmp_path / "model")
    assert reloaded.spec == model.spec
    assert reloaded.preprocess == model.preprocess
    assert np.array_equal(reloaded.predict_dist(images), model.predict_dist(images))


def test_two_heads_with_masked_labels():
    rng = np.random.default_rng(5)
    images = [toy_image(rng, bright_left=bool(i % 2)) for i in range(40)]
    targets = np.full((40, 2), -1, dtype=int)
    targets[::2, 0] = rng.integers(0, 3, 20)  # head 0 labeled on evens only
    targets[:, 1] = rng.integers(0, 3, 40)
    spec = ClassifierSpec(kind="baseline", n_outputs=6, n_heads=2, iterations=50)
    model = fit(images, targets, spec, PP)
    dist = model.predict_dist(images)
    assert dist.shape == (40, 2, 3)
    assert np.abs(dist.sum(axis=2) - 1.0).max() <= 1e-6


def test_fully_masked_head_rejected():
    images, labels = separable_set(10)
    targets = np.concatenate([labels, np.full((10, 1), -1)], axis=1)
    spec = ClassifierSpec(kind="baseline", n_outputs=4, n_heads=2, iterations=10)
    with pytest.raises(TrainingError, match="head 1"):
        fit(images, targets, spec, PP)


def test_empty_training_set_rejected():
    with pytest.raises(TrainingError):
        fit([], np.zeros((0, 1), dtype=int), binary_spec(), PP)


def test_inverse_frequency_falls_back_when_class_absent():
    images, _ = separable_set(20)
    labels = np.zeros((20, 1), dtype=int)  # class 1 never appears
    spec = binary_spec(class_weighting="inverse-frequency")
    with pytest.warns(UserWarning, match="falling back"):
        fit(images, labels, spec, PP)


def test_inverse_frequency_upweights_minority():
    rng = np.random.default_rng(11)
    # 90/10 imbalance with overlapping classes: weighting should raise
    # minority recall relative to the unweighted fit
    images, labels = [], []
    for i in range(120):
        label = 0 if i % 10 else 1
        images.append(toy_image(rng, bright_left=label == 0))
        labels.append([label])
    labels = np.asarray(labels)
    weighted = fit(images, labels, binary_spec(class_weighting="inverse-frequency"), PP)
    dist = weighted.predict_dist(images)
    minority = labels[:, 0] == 1
    assert (dist[minority, 0, :].argmax(axis=1) == 1).mean() >= 0.9


def test_predict_size_mismatch():
    images, labels = separable_set(10)
    model = fit(images, labels, binary_spec(), PP)
    wrong = VUImage(pixels=np.zeros((16, 16), dtype=np.float32), original_size=(16, 16))
    with pytest.raises(ContractError):
        model.predict_dist([wrong])


def test_spec_validation():
    with pytest.raises(Exception):
        ClassifierSpec(kind="svm", n_outputs=2)
    with pytest.raises(Exception):
        ClassifierSpec(kind="baseline", n_outputs=5, n_heads=2)
    with pytest.raises(Exception):
        ClassifierSpec(kind="baseline", n_outputs=2, learning_rate=0.0)
    with pytest.raises(Exception):
        ClassifierSpec(kind="baseline", n_outputs=2, class_weighting="balanced")
