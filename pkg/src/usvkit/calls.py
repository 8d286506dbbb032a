"""Call taxonomy shared across detection, classification and reporting."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

N_CLASSES = 5


class CallClass(IntEnum):
    """The five call categories.

    Flat calls modulate by less than 6 kHz, modulated calls by more,
    frequency steps jump instantaneously without a time gap, composite calls
    carry two harmonically independent simultaneous components, and short
    calls last under 5 ms.
    """

    FLAT = 0
    MODULATED = 1
    FREQUENCY_STEP = 2
    COMPOSITE = 3
    SHORT = 4


CLASS_LABELS = {
    CallClass.FLAT: "flat",
    CallClass.MODULATED: "modulated",
    CallClass.FREQUENCY_STEP: "freq_step",
    CallClass.COMPOSITE: "composite",
    CallClass.SHORT: "short",
}
LABEL_TO_CLASS = {v: k for k, v in CLASS_LABELS.items()}


@dataclass(frozen=True)
class ClassPrediction:
    """5-way softmax output with the argmax class and its probability."""

    pseudo_probabilities: np.ndarray  # shape (5,), sums to 1
    predicted_class: CallClass
    confidence: float

    def __post_init__(self) -> None:
        p = np.asarray(self.pseudo_probabilities, dtype=float)
        if p.shape != (N_CLASSES,):
            raise ValueError(f"expected {N_CLASSES} probabilities, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, expected 1")

    @classmethod
    def from_probabilities(cls, p: np.ndarray) -> "ClassPrediction":
        p = np.asarray(p, dtype=float)
        k = int(np.argmax(p))
        return cls(p, CallClass(k), float(p[k]))
