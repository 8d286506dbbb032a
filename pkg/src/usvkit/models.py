"""Builders for the two classifier architectures.

The flattened-input network is Y-shaped: three [batchnorm, dense, ReLU,
dropout] blocks process the 384 spectrogram features, the scalar duration
feature joins before the penultimate dense layer. Default widths
(126, 96, 64, 48) give 71,535 trainable parameters, within 0.1% of the
71,600 target.

The convolutional network is a small residual net: stem conv, three stages
of two residual blocks at 16/32/64 channels with stride-2 transitions,
global average pooling and a 5-way head; the duration enters as the
constant third input channel. The default plan has 175,493 trainable
parameters (the ~149k reference plan is approximated, not matched exactly;
the builder logs the delta).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from . import nnkit
from .nnkit import (
    BatchNorm,
    BranchConcat,
    Conv2d,
    Dense,
    Dropout,
    GlobalAveragePool,
    Model,
    ReLU,
    ResidualBlock,
    init_weights,
    param_count,
)
from .preprocess import DatasetStats

logger = logging.getLogger(__name__)

FNN_PARAM_TARGET = 71_600
CNN_PARAM_TARGET = 149_354
DROPOUT_RATE = 0.2
N_OUTPUTS = 5
FNN_INPUT = 384


@dataclass(frozen=True)
class FnnArchConfig:
    hidden: tuple[int, int, int] = (126, 96, 64)
    fusion: int = 48
    seed: int = 0

    def to_dict(self) -> dict:
        return {"kind": "fnn", "hidden": list(self.hidden), "fusion": self.fusion, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "FnnArchConfig":
        return cls(hidden=tuple(data["hidden"]), fusion=data["fusion"], seed=data.get("seed", 0))


@dataclass(frozen=True)
class CnnArchConfig:
    stem_channels: int = 16
    stage_channels: tuple[int, int, int] = (16, 32, 64)
    blocks_per_stage: int = 2
    stem_stride: int = 3  # keeps desk-scale training tractable at full input resolution
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": "cnn",
            "stem_channels": self.stem_channels,
            "stage_channels": list(self.stage_channels),
            "blocks_per_stage": self.blocks_per_stage,
            "stem_stride": self.stem_stride,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CnnArchConfig":
        return cls(
            stem_channels=data["stem_channels"],
            stage_channels=tuple(data["stage_channels"]),
            blocks_per_stage=data["blocks_per_stage"],
            stem_stride=data.get("stem_stride", 3),
            seed=data.get("seed", 0),
        )


def _fnn_block(n_in: int, n_out: int) -> list:
    return [BatchNorm(n_in), Dense(n_in, n_out), ReLU(), Dropout(DROPOUT_RATE)]


def fnn_closed_form_count(config: FnnArchConfig) -> int:
    h1, h2, h3 = config.hidden
    h4 = config.fusion
    dense = (
        (FNN_INPUT + 1) * h1
        + (h1 + 1) * h2
        + (h2 + 1) * h3
        + (h3 + 1 + 1) * h4
        + (h4 + 1) * N_OUTPUTS
    )
    batchnorm = 2 * (FNN_INPUT + h1 + h2)
    return dense + batchnorm


def build_fnn(config: FnnArchConfig = FnnArchConfig()) -> Model:
    """Y-shaped fully connected classifier on (384 features + duration)."""
    h1, h2, h3 = config.hidden
    if min(h1, h2, h3, config.fusion) < 1:
        raise ValueError("hidden sizes must be positive")
    branch = _fnn_block(FNN_INPUT, h1) + _fnn_block(h1, h2) + _fnn_block(h2, h3)
    layers = [
        BranchConcat(branch, passthrough=1),
        Dense(h3 + 1, config.fusion),
        ReLU(),
        Dropout(DROPOUT_RATE),
        Dense(config.fusion, N_OUTPUTS),
    ]
    model = init_weights(Model(layers), seed=config.seed)
    count = param_count(model)
    expected = fnn_closed_form_count(config)
    assert count == expected, f"builder count {count} != closed form {expected}"
    logger.info(
        "fnn parameters: %d (target %d, delta %+d)", count, FNN_PARAM_TARGET, count - FNN_PARAM_TARGET
    )
    return model


def _res_block(c_in: int, c_out: int, stride: int) -> ResidualBlock:
    inner = [
        Conv2d(c_in, c_out, 3, 3, stride=stride, padding=1),
        BatchNorm(c_out),
        ReLU(),
        Dropout(DROPOUT_RATE),
        Conv2d(c_out, c_out, 3, 3, stride=1, padding=1),
        BatchNorm(c_out),
    ]
    skip = None
    if stride != 1 or c_in != c_out:
        skip = [Conv2d(c_in, c_out, 1, 1, stride=stride, padding=0), BatchNorm(c_out)]
    return ResidualBlock(inner, skip)


def build_custom_cnn(config: CnnArchConfig = CnnArchConfig()) -> Model:
    """Small residual CNN on 3x201xW inputs (W free, pooling absorbs it)."""
    layers = [
        Conv2d(3, config.stem_channels, 3, 3, stride=config.stem_stride, padding=1),
        BatchNorm(config.stem_channels),
        ReLU(),
    ]
    c_in = config.stem_channels
    for stage, c_out in enumerate(config.stage_channels):
        for block in range(config.blocks_per_stage):
            stride = 2 if (stage > 0 and block == 0) else 1
            layers.append(_res_block(c_in, c_out, stride))
            c_in = c_out
    layers += [GlobalAveragePool(), Dense(c_in, N_OUTPUTS)]
    model = init_weights(Model(layers), seed=config.seed)
    count = param_count(model)
    logger.info(
        "cnn parameters: %d (target %d, delta %+d)", count, CNN_PARAM_TARGET, count - CNN_PARAM_TARGET
    )
    return model


def build_from_arch(arch: dict) -> Model:
    kind = arch.get("kind")
    if kind == "fnn":
        return build_fnn(FnnArchConfig.from_dict(arch))
    if kind == "cnn":
        return build_custom_cnn(CnnArchConfig.from_dict(arch))
    raise ValueError(f"unknown architecture kind {kind!r}")


def save_classifier(
    model: Model,
    path: str | Path,
    arch: FnnArchConfig | CnnArchConfig,
    train_config: nnkit.TrainConfig | None = None,
    stats: DatasetStats | None = None,
    extra: dict | None = None,
) -> None:
    nnkit.save_model(
        model,
        path,
        arch=arch.to_dict(),
        train_config=train_config.to_dict() if train_config else None,
        stats=stats.to_dict() if stats else None,
        extra=extra,
    )


def load_classifier(path: str | Path) -> tuple[Model, dict]:
    """Rebuild a model from its container; returns (model, metadata)."""
    payload = nnkit.read_container(path)
    model = build_from_arch(payload["arch"])
    nnkit.load_state(model, payload)
    meta = {
        "arch": payload["arch"],
        "train_config": payload.get("train_config"),
        "stats": DatasetStats.from_dict(payload["stats"]) if payload.get("stats") else None,
        "extra": payload.get("extra", {}),
    }
    return model, meta
