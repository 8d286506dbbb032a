"""Minimal neural-network kit sized for the two small classifiers:
explicit forward/backward layers, AdamW, label-smoothed cross-entropy and a
deterministic training loop, all in numpy."""

from .layers import (
    BatchNorm,
    BranchConcat,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    GlobalAveragePool,
    Layer,
    ReLU,
    ResidualBlock,
    Softmax,
)
from .loss import DEFAULT_TARGETS, batch_loss_and_grad, log_softmax, loss_ce_smoothed, softmax
from .model import Model, init_weights, param_count
from .optim import AdamW
from .serialize import load_state, read_container, save_model
from .training import TrainConfig, predict, predict_batch, train

__all__ = [
    "AdamW",
    "BatchNorm",
    "BranchConcat",
    "Conv2d",
    "DEFAULT_TARGETS",
    "Dense",
    "Dropout",
    "Flatten",
    "GlobalAveragePool",
    "Layer",
    "Model",
    "ReLU",
    "ResidualBlock",
    "Softmax",
    "TrainConfig",
    "batch_loss_and_grad",
    "init_weights",
    "load_state",
    "log_softmax",
    "loss_ce_smoothed",
    "param_count",
    "predict",
    "predict_batch",
    "read_container",
    "save_model",
    "softmax",
    "train",
]
