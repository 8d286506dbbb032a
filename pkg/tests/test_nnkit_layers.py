"""Gradient checks: every layer kind against central finite differences."""

import numpy as np
import pytest

from usvkit.nnkit import (
    BatchNorm,
    BranchConcat,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    GlobalAveragePool,
    Model,
    ReLU,
    ResidualBlock,
    Softmax,
    init_weights,
)
from usvkit.rng import Rng

from oracles import conv2d_direct, finite_difference_gradients, relative_error

H_FD = 1e-5
TOL = 1e-4


def _scalar_loss(model: Model, x: np.ndarray, seed: int = 0):
    """Deterministic scalar readout: weighted sum of outputs.

    Rebuilding the generator per call keeps dropout masks identical across
    finite-difference evaluations.
    """
    weights = {}

    def loss() -> float:
        gen = Rng(seed).generator()
        out = model.forward(x, gen)
        if "w" not in weights:
            weights["w"] = np.cos(np.arange(out.size)).reshape(out.shape)
        return float((out * weights["w"]).sum())

    def input_grad() -> np.ndarray:
        loss()
        return model.backward(weights["w"])

    return loss, input_grad


def _check_param_grads(model: Model, x: np.ndarray, sample: int | None = None, train: bool = True):
    model.train_mode() if train else model.eval_mode()
    loss, input_grad = _scalar_loss(model, x)
    input_grad()  # fills parameter gradients
    analytic = {k: v.copy() for k, v in model.named_grads().items()}
    fd = finite_difference_gradients(loss, model.named_params(), h=H_FD, sample=sample)
    worst = 0.0
    for name, rows in fd.items():
        flat = analytic[name].reshape(-1)
        for idx, g_fd in rows:
            worst = max(worst, relative_error(flat[int(idx)], g_fd))
    assert worst <= TOL, f"worst relative gradient error {worst:.2e}"


def _check_input_grad(model: Model, x: np.ndarray, train: bool = True):
    model.train_mode() if train else model.eval_mode()
    loss, input_grad = _scalar_loss(model, x)
    analytic = input_grad()
    flat = x.reshape(-1)
    gen = np.random.default_rng(0)
    idx = gen.choice(flat.size, size=min(30, flat.size), replace=False)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + H_FD
        up = loss()
        flat[i] = orig - H_FD
        down = loss()
        flat[i] = orig
        g_fd = (up - down) / (2 * H_FD)
        assert relative_error(analytic.reshape(-1)[i], g_fd) <= TOL


def test_dense_identity_forward():
    layer = Dense(4, 4)
    layer.weight = np.eye(4)
    x = np.arange(8.0).reshape(2, 4)
    assert np.array_equal(layer.forward(x, False, None), x)


def test_dense_gradients_match_outer_product():
    model = init_weights(Model([Dense(6, 3)]), seed=1)
    x = np.random.default_rng(2).normal(size=(4, 6))
    out = model.forward(x)
    dy = np.random.default_rng(3).normal(size=out.shape)
    model.backward(dy)
    grads = model.named_grads()
    assert np.allclose(grads["0.weight"], x.T @ dy, atol=1e-12)
    assert np.allclose(grads["0.bias"], dy.sum(axis=0), atol=1e-12)


def test_relu_forward():
    out = ReLU().forward(np.array([-1.0, 2.0]), False, None)
    assert np.array_equal(out, [0.0, 2.0])


def test_conv_matches_direct_oracle():
    gen = np.random.default_rng(5)
    for stride, padding in ((1, 1), (2, 1), (1, 0), (3, 1)):
        conv = Conv2d(2, 3, 3, 3, stride=stride, padding=padding)
        conv.weight = gen.normal(size=conv.weight.shape)
        conv.bias = gen.normal(size=3)
        x = gen.normal(size=(2, 2, 7, 6))
        ours = conv.forward(x, False, None)
        oracle = conv2d_direct(x, conv.weight, conv.bias, stride, padding)
        assert ours.shape == oracle.shape
        assert np.max(np.abs(ours - oracle)) < 1e-12


def test_single_3x3_conv_on_5x5_matches_oracle():
    gen = np.random.default_rng(9)
    conv = Conv2d(1, 1, 3, 3, stride=1, padding=0)
    conv.weight = gen.normal(size=(1, 1, 3, 3))
    conv.bias = np.zeros(1)
    x = gen.normal(size=(1, 1, 5, 5))
    assert np.max(np.abs(conv.forward(x, False, None) - conv2d_direct(x, conv.weight, conv.bias, 1, 0))) < 1e-12


def test_conv_receptive_field_guard():
    conv = Conv2d(1, 1, 3, 3, stride=1, padding=0)
    with pytest.raises(ValueError, match="receptive field"):
        conv.forward(np.zeros((1, 1, 2, 2)), False, None)


@pytest.mark.parametrize(
    "layers,shape",
    [
        ([Dense(5, 3)], (2, 5)),
        ([Conv2d(2, 3, 3, 3, stride=1, padding=1)], (2, 2, 6, 5)),
        ([Conv2d(2, 4, 3, 3, stride=2, padding=1)], (2, 2, 7, 6)),
        ([BatchNorm(4)], (3, 4)),
        ([BatchNorm(3)], (2, 3, 4, 5)),
        ([Dense(4, 4), ReLU()], (2, 4)),
        ([Dense(4, 6), Dropout(0.5)], (2, 4)),
        ([Conv2d(2, 2, 3, 3), Flatten(), Dense(2 * 5 * 4, 3)], (2, 2, 5, 4)),
        ([Conv2d(2, 3, 3, 3), GlobalAveragePool(), Dense(3, 2)], (2, 2, 5, 4)),
        ([Dense(5, 4), Softmax()], (2, 5)),
        ([ResidualBlock([Conv2d(2, 2, 3, 3), BatchNorm(2)])], (2, 2, 5, 4)),
        (
            [
                ResidualBlock(
                    [Conv2d(2, 4, 3, 3, stride=2), BatchNorm(4), ReLU(), Dropout(0.3), Conv2d(4, 4, 3, 3), BatchNorm(4)],
                    skip=[Conv2d(2, 4, 1, 1, stride=2, padding=0), BatchNorm(4)],
                )
            ],
            (2, 2, 6, 7),
        ),
        ([BranchConcat([BatchNorm(4), Dense(4, 3), ReLU(), Dropout(0.4)], passthrough=1), Dense(4, 2)], (3, 5)),
    ],
    ids=[
        "dense", "conv_s1", "conv_s2", "batchnorm_2d", "batchnorm_4d", "relu",
        "dropout", "flatten", "gap", "softmax", "residual_plain", "residual_proj", "branch_concat",
    ],
)
def test_layer_kind_gradients(layers, shape):
    model = init_weights(Model(layers), seed=7)
    x = np.random.default_rng(11).normal(size=shape)
    _check_param_grads(model, x)
    _check_input_grad(model, x)


def test_eval_mode_gradients_through_running_stats():
    model = init_weights(Model([BatchNorm(3), Dense(3, 2)]), seed=1)
    model.train_mode()
    gen = Rng(3).generator()
    for _ in range(4):  # populate running stats
        model.forward(np.random.default_rng(5).normal(size=(6, 3)), gen)
    x = np.random.default_rng(6).normal(size=(2, 3))
    _check_param_grads(model, x, train=False)
    _check_input_grad(model, x, train=False)


def test_zero_loss_grad_gives_zero_param_grads():
    model = init_weights(Model([Dense(4, 3), ReLU(), Dense(3, 2)]), seed=2)
    x = np.random.default_rng(1).normal(size=(3, 4))
    model.forward(x)
    model.backward(np.zeros((3, 2)))
    assert all(np.all(g == 0) for g in model.named_grads().values())


def test_dropout_eval_is_identity_and_train_scales():
    layer = Dropout(0.25)
    x = np.ones((200, 50))
    out_eval = layer.forward(x, False, None)
    assert np.array_equal(out_eval, x)
    gen = Rng(0).generator()
    out_train = layer.forward(x, True, gen)
    kept = out_train[out_train > 0]
    assert np.allclose(kept, 1.0 / 0.75)
    assert abs(out_train.mean() - 1.0) < 0.02  # inverted dropout preserves expectation


def test_softmax_properties():
    layer = Softmax()
    gen = np.random.default_rng(4)
    z = gen.normal(size=(8, 5))
    p = layer.forward(z, False, None)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    p_shift = Softmax().forward(z + 123.0, False, None)
    assert np.allclose(p, p_shift, atol=1e-12)


def test_backward_requires_forward():
    model = Model([Dense(3, 2)])
    with pytest.raises(RuntimeError):
        model.backward(np.zeros((1, 2)))


def test_param_count_examples():
    from usvkit.nnkit import param_count

    assert param_count(Model([Dense(384, 100)])) == 38_500
    assert param_count(Model([BatchNorm(64)])) == 128
