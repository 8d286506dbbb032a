"""Deterministic mini-batch training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..calls import CallClass, ClassPrediction
from ..rng import Rng
from .loss import DEFAULT_TARGETS, batch_loss_and_grad, softmax
from .model import Model
from .optim import AdamW

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    epochs: int = 100
    batch_size: int = 32
    label_smoothing_targets: tuple[float, float] = DEFAULT_TARGETS
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        off, on = self.label_smoothing_targets
        if not 0.0 <= off < on <= 1.0:
            raise ValueError("label smoothing targets must satisfy 0 <= off < on <= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "label_smoothing_targets": list(self.label_smoothing_targets),
            "seed": self.seed,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        if "label_smoothing_targets" in data:
            data["label_smoothing_targets"] = tuple(data["label_smoothing_targets"])
        return cls(**data)


def train(
    model: Model,
    dataset: list[tuple[np.ndarray, CallClass | int]],
    config: TrainConfig,
) -> list[float]:
    """Train in place with AdamW and seeded shuffling; returns the per-epoch
    mean loss history and leaves the model in eval mode.

    Per epoch, the sample permutation and all dropout masks derive from
    Rng(config.seed).split(epoch), so identical configs reproduce identical
    weights bit for bit. Inputs are cast to config.dtype batch by batch.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    dtype = np.dtype(config.dtype)
    model.astype(dtype)
    model.train_mode()
    opt = AdamW(config.learning_rate, config.weight_decay)
    root = Rng(config.seed)
    labels_all = np.array([int(label) for _, label in dataset])
    history: list[float] = []

    for epoch in range(config.epochs):
        gen = root.split(epoch).generator()
        order = gen.permutation(len(dataset))
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            x = np.stack([np.asarray(dataset[i][0]) for i in idx]).astype(dtype)
            y = labels_all[idx]
            logits = model.forward(x, gen)
            loss, dlogits = batch_loss_and_grad(logits, y, config.label_smoothing_targets)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"training diverged (loss={loss}) at epoch {epoch}, "
                    f"batch {start // config.batch_size}"
                )
            model.backward(dlogits.astype(dtype))
            opt.step(model.named_params(), model.named_grads())
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
        logger.debug("epoch %d: mean loss %.5f", epoch, history[-1])

    model.astype(np.float64)
    model.eval_mode()
    return history


def predict(model: Model, x: np.ndarray) -> ClassPrediction:
    """Softmax prediction for a single input; model must be in eval mode."""
    if model.training:
        raise RuntimeError("predict requires eval mode")
    logits = model.forward(np.asarray(x, dtype=np.float64)[None, ...])
    p = softmax(logits[0])
    return ClassPrediction.from_probabilities(p / p.sum())


def predict_batch(model: Model, xs: list[np.ndarray], batch_size: int = 64) -> list[ClassPrediction]:
    if model.training:
        raise RuntimeError("predict requires eval mode")
    out: list[ClassPrediction] = []
    for start in range(0, len(xs), batch_size):
        batch = np.stack([np.asarray(x, dtype=np.float64) for x in xs[start : start + batch_size]])
        logits = model.forward(batch)
        probs = softmax(logits)
        for p in probs:
            out.append(ClassPrediction.from_probabilities(p / p.sum()))
    return out
