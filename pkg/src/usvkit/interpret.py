"""Model interpretability: path-integrated input attributions and channel
visualization by gradient ascent.

Attribution integrates the target-logit gradient along the straight path
from a baseline to the input (right-Riemann, all steps in one batched
forward/backward), optionally averaged over noise-perturbed copies of the
input. Channel visualization synthesizes an input that maximizes one
channel's mean activation under small random translations and rescalings,
with the final rectifier's backward pass opened up for the first 16
iterations so a dead channel can still receive gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calls import CallClass
from .nnkit import Model
from .nnkit.optim import AdamW
from .rng import Rng

GRAD_CLIP = 1e3
RELU_PASSTHROUGH_ITERS = 16


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel attribution toward one class, shaped like the full input.

    For 3-channel spectrogram inputs, `db_channel` is the slice that gets
    reported (the model's decisions ride on the dB channel); the full array
    is kept so the completeness identity sum(attributions) = F(x) - F(b)
    stays checkable.
    """

    attributions: np.ndarray
    target_class: CallClass

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.attributions)):
            raise ValueError("attributions must be finite")

    @property
    def db_channel(self) -> np.ndarray:
        a = self.attributions
        return a[1] if a.ndim == 3 and a.shape[0] == 3 else a


def _target_gradients(model: Model, xs: np.ndarray, target_class: int) -> np.ndarray:
    """d logit[target] / d input for a batch, via one forward/backward."""
    out = model.forward(xs)
    seed = np.zeros_like(out)
    seed[:, int(target_class)] = 1.0
    return model.backward(seed)


def _mean_path_gradient(
    model: Model, x: np.ndarray, b: np.ndarray, alphas: np.ndarray, target_class: int,
    chunk: int = 25,
) -> np.ndarray:
    """Mean input gradient over the straight path points b + alpha*(x-b).

    Evaluated in chunks: convolution intermediates scale with batch size, so
    a single batch over hundreds of path points would not fit in memory.
    """
    total = np.zeros_like(x)
    for start in range(0, alphas.size, chunk):
        part = alphas[start : start + chunk]
        batch = b[None, ...] + part.reshape((-1,) + (1,) * x.ndim) * (x - b)[None, ...]
        total += _target_gradients(model, batch, target_class).sum(axis=0)
    return total / alphas.size


def integrated_gradients(
    model: Model,
    input_array: np.ndarray,
    baseline: np.ndarray | None = None,
    target_class: CallClass | int = 0,
    steps: int = 50,
) -> SaliencyMap:
    """Midpoint-rule integrated gradients of the target logit.

    IG_i = (x_i - b_i) * (1/steps) * sum_s dF(b + alpha_s (x - b))/dx_i with
    alpha_s = (s - 0.5)/steps. The midpoint quadrature keeps the
    completeness identity sum(IG) = F(x) - F(b) tight at 50 steps even for
    rectifier networks, whose path integrand is piecewise constant; an
    endpoint rule needs several times more samples for the same accuracy.
    The default baseline is all zeros in the model's input space.
    """
    if model.training:
        raise RuntimeError("attribution requires eval mode")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(input_array, dtype=np.float64)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if b.shape != x.shape:
        raise ValueError(f"baseline shape {b.shape} != input shape {x.shape}")
    alphas = (np.arange(steps) + 0.5) / steps
    mean_grad = _mean_path_gradient(model, x, b, alphas, int(target_class))
    return SaliencyMap(
        attributions=(x - b) * mean_grad, target_class=CallClass(int(target_class))
    )


def completeness_gap(model: Model, saliency: SaliencyMap, input_array, baseline=None) -> float:
    """Relative size of sum(IG) - (F(x) - F(b)); small means well converged."""
    x = np.asarray(input_array, dtype=np.float64)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    k = int(saliency.target_class)
    fx = float(model.forward(x[None])[0, k])
    fb = float(model.forward(b[None])[0, k])
    delta = fx - fb
    return abs(float(saliency.attributions.sum()) - delta) / max(abs(delta), 1e-12)


def smoothgrad_ig(
    model: Model,
    input_array: np.ndarray,
    target_class: CallClass | int,
    n_samples: int = 5,
    noise_std: float = 0.1,
    steps: int = 50,
    rng: Rng | None = None,
    baseline: np.ndarray | None = None,
) -> SaliencyMap:
    """Mean of integrated-gradients maps over noise-perturbed inputs."""
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if noise_std == 0.0:
        return integrated_gradients(model, input_array, baseline, target_class, steps)
    if rng is None:
        raise ValueError("smoothgrad with noise needs an Rng")
    x = np.asarray(input_array, dtype=np.float64)
    gen = rng.generator()
    maps = [
        integrated_gradients(
            model, x + gen.normal(0.0, noise_std, size=x.shape), baseline, target_class, steps
        ).attributions
        for _ in range(n_samples)
    ]
    return SaliencyMap(
        attributions=np.mean(maps, axis=0), target_class=CallClass(int(target_class))
    )


@dataclass(frozen=True)
class ChannelVisualization:
    synthesized: np.ndarray
    layer_index: int
    channel: int
    activation_trace: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.activation_trace)):
            raise ValueError("activation trace must be finite")


def _zoom_matrix(n: int, scale: float) -> np.ndarray:
    """Same-size linear resampling about the center, edge-clamped."""
    center = (n - 1) / 2.0
    src = center + (np.arange(n) - center) / scale
    src = np.clip(src, 0.0, n - 1)
    m = np.zeros((n, n))
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = src - i0
    m[np.arange(n), i0] += 1.0 - frac
    m[np.arange(n), i1] += frac
    return m


def _shift_matrix(n: int, shift: int) -> np.ndarray:
    """Zero-fill translation as a matrix so the adjoint is its transpose."""
    m = np.zeros((n, n))
    rows = np.arange(n)
    src = rows - shift
    ok = (src >= 0) & (src < n)
    m[rows[ok], src[ok]] = 1.0
    return m


def activation_maximization(
    model: Model,
    layer_index: int,
    channel: int,
    n_iters: int = 256,
    lr: float = 0.05,
    rng: Rng | None = None,
    input_shape: tuple[int, ...] | None = None,
    fixed_channels: dict[int, float] | None = None,
) -> ChannelVisualization:
    """Synthesize an input maximizing a channel's mean activation.

    Per iteration the image is randomly moved by up to one pixel and
    rescaled by a factor in [0.9, 1.1] before the forward pass; Adam
    (lr 0.05) ascends the spatial mean of the chosen channel. Gradients are
    clipped at magnitude 1e3. `fixed_channels` pins input channels (the
    constant duration plane) at a given value, excluded from optimization.
    """
    if rng is None:
        raise ValueError("activation maximization needs an Rng")
    if input_shape is None:
        raise ValueError("input_shape is required")
    sub = model.truncate(layer_index)
    relus = sub.relu_layers()
    final_relu = relus[-1] if relus else None
    gen = rng.generator()

    z = gen.normal(0.0, 0.05, size=input_shape)
    fixed = fixed_channels or {}
    for ch, value in fixed.items():
        z[ch] = value

    opt = AdamW(learning_rate=lr, weight_decay=0.0)
    params = {"z": z}
    trace: list[float] = []
    try:
        for it in range(n_iters):
            if final_relu is not None:
                final_relu.passthrough_backward = it < RELU_PASSTHROUGH_ITERS
            shift_h, shift_w = (int(s) for s in gen.integers(-1, 2, size=2))
            scale = float(gen.uniform(0.9, 1.1))
            if z.ndim == 3:
                ah = _zoom_matrix(z.shape[1], scale) @ _shift_matrix(z.shape[1], shift_h)
                aw = _zoom_matrix(z.shape[2], scale) @ _shift_matrix(z.shape[2], shift_w)
                transformed = np.einsum("ij,cjk,lk->cil", ah, z, aw)
            else:
                transformed = z
            out = sub.forward(transformed[None, ...])
            if out.ndim == 4:
                if not 0 <= channel < out.shape[1]:
                    raise IndexError(f"channel {channel} out of range for {out.shape[1]} channels")
                objective = float(out[0, channel].mean())
                seed = np.zeros_like(out)
                seed[0, channel] = 1.0 / (out.shape[2] * out.shape[3])
            else:
                if not 0 <= channel < out.shape[1]:
                    raise IndexError(f"channel {channel} out of range for {out.shape[1]} features")
                objective = float(out[0, channel])
                seed = np.zeros_like(out)
                seed[0, channel] = 1.0
            trace.append(objective)
            grad = sub.backward(seed)[0]
            if z.ndim == 3:
                grad = np.einsum("ji,cjk,kl->cil", ah, grad, aw)  # adjoint of the transform
            grad = np.clip(grad, -GRAD_CLIP, GRAD_CLIP)
            opt.step(params, {"z": -grad})  # ascend
            for ch, value in fixed.items():
                z[ch] = value
    finally:
        if final_relu is not None:
            final_relu.passthrough_backward = False

    return ChannelVisualization(
        synthesized=z,
        layer_index=layer_index,
        channel=channel,
        activation_trace=np.array(trace),
    )
