"""Self-describing JSON model container.

Weights and batchnorm running statistics are stored as base64-encoded
little-endian 64-bit reals keyed by layer path, together with the
architecture config and training provenance (train config, dataset stats),
so a container alone is enough to rebuild and run the model.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .model import Model

FORMAT_NAME = "usvkit-model"
FORMAT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).astype(np.float64)


def save_model(
    model: Model,
    path: str | Path,
    arch: dict,
    train_config: dict | None = None,
    stats: dict | None = None,
    extra: dict | None = None,
) -> None:
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "arch": arch,
        "params": {name: _encode_array(a) for name, a in model.named_params().items()},
        "buffers": {name: _encode_array(a) for name, a in model.named_buffers().items()},
        "train_config": train_config,
        "stats": stats,
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(payload))


def read_container(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != FORMAT_NAME:
        raise ValueError(f"{path} is not a {FORMAT_NAME} container")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {payload.get('version')}")
    return payload


def load_state(model: Model, payload: dict) -> Model:
    """Restore weights/buffers from a container into a freshly built model."""
    params = payload["params"]
    expected = set(model.named_params())
    if set(params) != expected:
        missing = expected - set(params)
        surplus = set(params) - expected
        raise ValueError(f"container mismatch (missing {missing or '{}'}, surplus {surplus or '{}'})")
    for name, entry in params.items():
        arr = _decode_array(entry)
        if list(arr.shape) != list(model.named_params()[name].shape):
            raise ValueError(f"shape mismatch for {name}")
        model.set_param(name, arr)
    for name, entry in payload.get("buffers", {}).items():
        model.set_buffer(name, _decode_array(entry))
    model.eval_mode()
    return model
