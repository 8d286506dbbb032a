import numpy as np
import pytest

from usvkit.models import (
    FNN_PARAM_TARGET,
    CnnArchConfig,
    FnnArchConfig,
    build_custom_cnn,
    build_fnn,
    build_from_arch,
    fnn_closed_form_count,
    load_classifier,
    save_classifier,
)
from usvkit.nnkit import TrainConfig, param_count
from usvkit.preprocess import DatasetStats
from usvkit.rng import Rng


def test_fnn_param_count_matches_closed_form():
    config = FnnArchConfig()
    model = build_fnn(config)
    assert param_count(model) == fnn_closed_form_count(config) == 71_535


def test_fnn_param_count_within_one_percent_of_target():
    count = param_count(build_fnn())
    assert abs(count - FNN_PARAM_TARGET) / FNN_PARAM_TARGET < 0.01


def test_cnn_param_count_in_range():
    count = param_count(build_custom_cnn())
    assert 120_000 <= count <= 180_000
    assert count == 175_493


def test_fnn_forward_zero_input_finite():
    model = build_fnn()
    out = model.forward(np.zeros((2, 385)))
    assert out.shape == (2, 5)
    assert np.all(np.isfinite(out))


def test_fnn_duration_feature_is_live():
    model = build_fnn()
    base = np.random.default_rng(1).uniform(size=(1, 385))
    other = base.copy()
    other[0, -1] = 1.0 - other[0, -1]
    assert not np.allclose(model.forward(base), model.forward(other))


def test_cnn_accepts_both_widths():
    model = build_custom_cnn()
    for width in (150, 170):
        out = model.forward(np.random.default_rng(0).normal(size=(1, 3, 201, width)))
        assert out.shape == (1, 5)


def test_cnn_eval_deterministic_fixed_input():
    model = build_custom_cnn()
    x = np.random.default_rng(2).normal(size=(1, 3, 201, 170))
    assert np.array_equal(model.forward(x), model.forward(x))


def test_cnn_train_forward_reproducible_with_seed():
    model = build_custom_cnn()
    model.train_mode()
    x = np.random.default_rng(3).normal(size=(2, 3, 201, 150))
    a = model.forward(x, Rng(5).generator())
    b = model.forward(x, Rng(5).generator())
    assert np.array_equal(a, b)


def test_cnn_rejects_degenerate_width():
    model = build_custom_cnn()
    with pytest.raises(ValueError, match="receptive field"):
        model.forward(np.zeros((1, 3, 201, 0)))


def test_builders_deterministic_per_seed():
    a = build_fnn(FnnArchConfig(seed=4))
    b = build_fnn(FnnArchConfig(seed=4))
    for (ka, va), (kb, vb) in zip(a.named_params().items(), b.named_params().items()):
        assert ka == kb
        assert np.array_equal(va, vb)


def test_build_from_arch_round_trip():
    for config in (FnnArchConfig(), CnnArchConfig()):
        model = build_from_arch(config.to_dict())
        assert param_count(model) > 0
    with pytest.raises(ValueError):
        build_from_arch({"kind": "transformer"})


def test_save_load_classifier(tmp_path):
    model = build_fnn(FnnArchConfig(seed=2))
    stats = DatasetStats(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    path = tmp_path / "clf.json"
    save_classifier(
        model,
        path,
        FnnArchConfig(seed=2),
        TrainConfig(epochs=1),
        stats,
        extra={"mean_time": 0.25},
    )
    loaded, meta = load_classifier(path)
    x = np.random.default_rng(1).normal(size=(2, 385))
    assert np.array_equal(model.forward(x), loaded.forward(x))
    assert meta["arch"]["kind"] == "fnn"
    assert meta["extra"]["mean_time"] == 0.25
    assert np.array_equal(meta["stats"].mean, stats.mean)
