"""Label-smoothed cross-entropy.

Targets are `on` at the true class and `off` elsewhere, used exactly as
configured without renormalizing (the default 0.9/0.05 pair sums to 1.1
over five classes; the gradient simply scales accordingly).
"""

from __future__ import annotations

import numpy as np

from ..calls import N_CLASSES, CallClass

DEFAULT_TARGETS = (0.05, 0.9)  # (off, on)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def smoothing_target(label: CallClass | int, targets: tuple[float, float] = DEFAULT_TARGETS) -> np.ndarray:
    off, on = targets
    if not 0.0 <= off < on <= 1.0:
        raise ValueError("smoothing targets must satisfy 0 <= off < on <= 1")
    t = np.full(N_CLASSES, off)
    t[int(label)] = on
    return t


def loss_ce_smoothed(
    logits: np.ndarray,
    label: CallClass | int,
    targets: tuple[float, float] = DEFAULT_TARGETS,
) -> float:
    """Cross-entropy of one logit vector against its smoothed target."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (N_CLASSES,):
        raise ValueError(f"expected {N_CLASSES} logits, got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return float(-(smoothing_target(label, targets) * log_softmax(logits)).sum())


def batch_loss_and_grad(
    logits: np.ndarray,
    labels: np.ndarray,
    targets: tuple[float, float] = DEFAULT_TARGETS,
) -> tuple[float, np.ndarray]:
    """Mean smoothed cross-entropy over a batch and its logit gradient."""
    n = logits.shape[0]
    t = np.stack([smoothing_target(int(label), targets) for label in labels]).astype(logits.dtype)
    logp = log_softmax(logits)
    loss = float(-(t * logp).sum() / n)
    # d/dz of -sum(t*logp) is (sum(t))*softmax(z) - t
    grad = (t.sum(axis=1, keepdims=True) * softmax(logits) - t) / n
    return loss, grad
