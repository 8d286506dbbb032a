"""STFT energy and dB spectrograms.

Two fixed parameter sets are used downstream: 256-point segments without
overlap (129 frequency bins, ~1.024 ms per column at 250 kHz) for detection
and the flattened-input classifier, and 400-point segments with a 250-sample
hop (201 bins, exactly 1 ms per column at 250 kHz) for the convolutional
classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .audio_io import Recording


class Scale(Enum):
    ENERGY = "energy"
    DECIBEL = "decibel"


@dataclass(frozen=True)
class StftParams:
    """Window and framing parameters of the short-time Fourier transform."""

    segment_length: int = 256
    dft_length: int = 256
    overlap: int = 0
    tukey_shape: float = 0.25

    def __post_init__(self) -> None:
        if self.segment_length < 2:
            raise ValueError("segment_length must be at least 2")
        if not 0 <= self.overlap < self.segment_length:
            raise ValueError("overlap must satisfy 0 <= overlap < segment_length")
        if self.dft_length < self.segment_length:
            raise ValueError("dft_length must be >= segment_length")
        if not 0.0 <= self.tukey_shape <= 1.0:
            raise ValueError("tukey_shape must lie in [0, 1]")

    @property
    def hop(self) -> int:
        return self.segment_length - self.overlap


DETECTION_STFT = StftParams(segment_length=256, dft_length=256, overlap=0, tukey_shape=0.25)
CNN_STFT = StftParams(segment_length=400, dft_length=400, overlap=150, tukey_shape=0.25)


@dataclass(frozen=True)
class SpectrogramGrid:
    """Time-frequency matrix indexed [time][frequency] with axis metadata."""

    values: np.ndarray
    dt_s: float
    df_hz: float
    f0_hz: float = 0.0
    scale: Scale = Scale.ENERGY

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D [time][frequency] matrix")
        if self.dt_s <= 0 or self.df_hz <= 0:
            raise ValueError("dt_s and df_hz must be positive")
        if self.scale is Scale.ENERGY and values.size and float(values.min()) < 0:
            raise ValueError("energy-scale values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    @property
    def n_freqs(self) -> int:
        return self.values.shape[1]

    def frequency_of(self, row: int) -> float:
        return self.f0_hz + row * self.df_hz


def tukey_window(n: int, shape: float) -> np.ndarray:
    """Symmetric Tukey (tapered cosine) window of length n.

    A fraction shape/2 of the window is cosine-tapered at each end and the
    middle is flat at 1; shape 0 is rectangular and shape 1 is Hann.
    """
    if n < 2:
        raise ValueError("window length must be at least 2")
    if not 0.0 <= shape <= 1.0:
        raise ValueError("shape must lie in [0, 1]")
    if shape == 0.0:
        return np.ones(n)
    w = np.ones(n)
    edge = shape * (n - 1) / 2.0
    k = np.arange(n)
    left = k < edge
    w[left] = 0.5 * (1.0 + np.cos(np.pi * (2.0 * k[left] / (shape * (n - 1)) - 1.0)))
    w = np.minimum(w, w[::-1])  # enforce exact symmetry
    return w


def stft_energy(recording: Recording, params: StftParams = DETECTION_STFT) -> SpectrogramGrid:
    """Squared-magnitude STFT of a recording with non-centered frames.

    Column count is floor((len - segment) / hop) + 1; the trailing partial
    segment, if any, is dropped. The forward DFT is unnormalized: every
    downstream detection feature is a ratio, so the absolute scale cancels.
    """
    x = recording.samples
    seg, hop, nfft = params.segment_length, params.hop, params.dft_length
    if x.size < seg:
        raise ValueError(
            f"recording of {x.size} samples is shorter than one {seg}-sample segment"
        )
    n_cols = (x.size - seg) // hop + 1
    window = tukey_window(seg, params.tukey_shape)
    starts = np.arange(n_cols) * hop
    frames = x[starts[:, None] + np.arange(seg)[None, :]] * window
    spectrum = np.fft.rfft(frames, n=nfft, axis=1)
    values = (spectrum.real**2 + spectrum.imag**2)
    return SpectrogramGrid(
        values=values,
        dt_s=hop / recording.sample_rate_hz,
        df_hz=recording.sample_rate_hz / nfft,
        f0_hz=0.0,
        scale=Scale.ENERGY,
    )


def to_db(grid: SpectrogramGrid, clip_range_db: float) -> SpectrogramGrid:
    """Convert an energy grid to decibels, clipping the floor.

    The floor is raised so that max - min never exceeds clip_range_db; zero
    energy therefore maps to the clip floor. An all-zero grid converts to
    all zeros (uniform, range 0).
    """
    if grid.scale is not Scale.ENERGY:
        raise ValueError("to_db expects an energy-scale grid")
    if clip_range_db <= 0:
        raise ValueError("clip_range_db must be positive")
    energy = grid.values
    peak = float(energy.max()) if energy.size else 0.0
    if peak == 0.0:
        db = np.zeros_like(energy)
    else:
        floor_energy = peak * 10.0 ** (-clip_range_db / 10.0)
        db = 10.0 * np.log10(np.maximum(energy, floor_energy))
    return replace(grid, values=db, scale=Scale.DECIBEL)
