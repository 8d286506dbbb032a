"""Classifier input pipelines.

Two consumers with different appetites:

* the flattened-input network takes a min-max normalized 129-bin dB
  spectrogram, trimmed and block-averaged down to 48x8 plus the relative
  call duration;
* the convolutional network takes full-resolution 201-bin spectrograms as a
  two-channel stack (energy-scale "smooth" + 60 dB-clipped dB), dataset
  normalized, padded/cropped to a fixed width, with the duration replicated
  into a third constant channel.

Training modes apply randomized trims/shifts/noise from an explicit Rng;
evaluation modes are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .audio_io import Recording
from .detection import CallSnippet
from .rng import Rng
from .spectrogram import CNN_STFT, DETECTION_STFT, stft_energy, to_db

FNN_PAD_MS = 10.0
FNN_CLIP_DB = 80.0
FNN_SHAPE = (48, 8)  # frequency x time
FNN_TRAIN_TRIM_MAX = 9
FNN_EVAL_TRIM = 4
FNN_NOISE_STD = 0.05

CNN_PAD_MS = 60.0
CNN_CLIP_DB = 60.0
CNN_CROP_MAX = 170
CNN_PADDED_WIDTH = 190
CNN_TRAIN_WIDTH = 150
CNN_EVAL_WIDTH = 170
CNN_RESCALE_RANGE = (170, 220)
CNN_TIME_SHIFT_MAX = 10
CNN_FREQ_SHIFT_MAX = 10
CNN_NOISE_STD = 0.01

MAX_DURATION_MS = 150.0  # observed maximum call length used for the duration feature


class Mode(Enum):
    TRAIN = "train"
    EVAL = "eval"


def relative_duration(duration_ms: float) -> float:
    """Call duration scaled by the ~150 ms maximum, clamped to [0, 1]."""
    return float(np.clip(duration_ms / MAX_DURATION_MS, 0.0, 1.0))


@dataclass(frozen=True)
class FnnInput:
    """Flattened 48x8 spectrogram (frequency-major) plus relative duration."""

    s: np.ndarray
    t: float

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=np.float64)
        if s.shape != (FNN_SHAPE[0] * FNN_SHAPE[1],):
            raise ValueError(f"expected flat vector of {FNN_SHAPE[0] * FNN_SHAPE[1]}")
        if s.size and (s.min() < -1e-12 or s.max() > 1 + 1e-12):
            raise ValueError("spectrogram features must lie in [0, 1]")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("duration feature must lie in [0, 1]")
        object.__setattr__(self, "s", s)

    def vector(self) -> np.ndarray:
        """Model input: the 384 spectrogram features with T appended."""
        return np.concatenate([self.s, [self.t]])


@dataclass(frozen=True)
class CnnInput:
    """3 x 201 x width array: smooth channel, dB channel, constant duration."""

    array: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 3 or a.shape[0] != 3 or a.shape[1] != CNN_STFT.dft_length // 2 + 1:
            raise ValueError(f"unexpected input shape {a.shape}")
        if a.shape[2] not in (CNN_TRAIN_WIDTH, CNN_EVAL_WIDTH):
            raise ValueError(f"unexpected time width {a.shape[2]}")
        if np.ptp(a[2]) != 0.0:
            raise ValueError("time-feature channel must be constant")
        object.__setattr__(self, "array", a)


@dataclass(frozen=True)
class DatasetStats:
    """Global per-channel mean/std of the labeled set, used for normalization."""

    mean: np.ndarray  # shape (2,): smooth, dB
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        std = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if mean.shape != (2,) or std.shape != (2,):
            raise ValueError("stats cover exactly the two spectrogram channels")
        if np.any(std <= 0):
            raise ValueError("std must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetStats":
        return cls(np.asarray(data["mean"]), np.asarray(data["std"]))


def _snippet_recording(snippet: CallSnippet) -> Recording:
    return Recording(id="snippet", samples=snippet.waveform, sample_rate_hz=snippet.sample_rate_hz)


def _require_pad(snippet: CallSnippet, expected_ms: float) -> None:
    if abs(snippet.pad_ms - expected_ms) > 1e-9:
        raise ValueError(
            f"snippet extracted with pad_ms={snippet.pad_ms}, this pipeline needs {expected_ms}"
        )


def downsample_mean(grid: np.ndarray, out_rows: int, out_cols: int) -> np.ndarray:
    """Block-average a matrix onto a coarser grid.

    Rows/columns are partitioned into out_rows/out_cols near-equal
    contiguous groups covering the input exactly; each output cell is the
    mean of its block.
    """
    grid = np.asarray(grid, dtype=np.float64)
    n_rows, n_cols = grid.shape
    if out_rows <= 0 or out_cols <= 0:
        raise ValueError("output dimensions must be positive")
    if out_rows > n_rows or out_cols > n_cols:
        raise ValueError("output dimensions must not exceed input dimensions")
    row_edges = (np.arange(out_rows + 1) * n_rows) // out_rows
    col_edges = (np.arange(out_cols + 1) * n_cols) // out_cols
    # sum over column groups first, then row groups, divide by block areas
    col_sums = np.add.reduceat(grid, col_edges[:-1], axis=1)
    block_sums = np.add.reduceat(col_sums, row_edges[:-1], axis=0)
    areas = np.outer(np.diff(row_edges), np.diff(col_edges))
    return block_sums / areas


def _clamped_trims(n_cols: int, left: int, right: int, keep: int) -> tuple[int, int]:
    """Shrink requested trims so at least `keep` columns survive."""
    allowed = max(n_cols - keep, 0)
    left = min(left, allowed)
    right = min(right, allowed - left)
    return left, right


def fnn_preprocess(snippet: CallSnippet, mode: Mode, rng: Rng | None = None) -> FnnInput:
    """48x8 flattened dB spectrogram features plus relative duration.

    Training trims a random 0-9 columns per side (offsetting boundary
    jitter of the detector) and adds clamped Gaussian noise; evaluation
    trims 4 per side, leaving ~6 ms of effective padding.
    """
    _require_pad(snippet, FNN_PAD_MS)
    if mode is Mode.TRAIN and rng is None:
        raise ValueError("training mode needs an Rng")
    grid = to_db(stft_energy(_snippet_recording(snippet), DETECTION_STFT), FNN_CLIP_DB)
    values = grid.values  # [time][freq]
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        values = (values - lo) / (hi - lo)
    else:
        values = np.zeros_like(values)  # degenerate constant spectrogram carries no signal

    n_cols = values.shape[0]
    if n_cols < FNN_SHAPE[1]:
        raise ValueError(f"snippet yields only {n_cols} spectrogram columns, need >= 8")
    gen = rng.generator() if rng is not None else None
    if mode is Mode.TRAIN:
        left, right = (int(v) for v in gen.integers(0, FNN_TRAIN_TRIM_MAX + 1, size=2))
    else:
        left = right = FNN_EVAL_TRIM
    left, right = _clamped_trims(n_cols, left, right, keep=FNN_SHAPE[1])
    values = values[left : n_cols - right]

    small = downsample_mean(values.T, FNN_SHAPE[0], FNN_SHAPE[1])
    flat = small.reshape(-1)
    if mode is Mode.TRAIN:
        flat = np.clip(flat + gen.normal(0.0, FNN_NOISE_STD, size=flat.shape), 0.0, 1.0)
    return FnnInput(s=flat, t=relative_duration(snippet.duration_ms))


def linear_resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) linear-interpolation matrix with endpoint alignment."""
    if n_in < 1 or n_out < 1:
        raise ValueError("sizes must be positive")
    m = np.zeros((n_out, n_in))
    if n_out == 1 or n_in == 1:
        m[:, (n_in - 1) // 2] = 1.0
        return m
    src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    m[np.arange(n_out), i0] += 1.0 - frac
    m[np.arange(n_out), i1] += frac
    return m


def _center_crop(array: np.ndarray, width: int, axis: int = -1) -> np.ndarray:
    n = array.shape[axis]
    if width > n:
        raise ValueError(f"cannot crop {n} columns to {width}")
    start = (n - width) // 2
    index = [slice(None)] * array.ndim
    index[axis] = slice(start, start + width)
    return array[tuple(index)]


def _shift_replicate(array: np.ndarray, shift: int, axis: int) -> np.ndarray:
    """Translate content by `shift` along axis, replicating the entered edge."""
    n = array.shape[axis]
    idx = np.clip(np.arange(n) - shift, 0, n - 1)
    return np.take(array, idx, axis=axis)


def cnn_channels(snippet: CallSnippet) -> tuple[np.ndarray, float]:
    """Smooth + dB channel stack (2, 201, T) and the padded length in ms."""
    _require_pad(snippet, CNN_PAD_MS)
    grid = stft_energy(_snippet_recording(snippet), CNN_STFT)
    db = to_db(grid, CNN_CLIP_DB)
    channels = np.stack([grid.values.T, db.values.T])
    ell_ms = snippet.waveform.size / snippet.sample_rate_hz * 1000.0
    return channels, ell_ms


def _crop_width(ell_ms: float) -> int:
    width = int(min(ell_ms - 100.0, float(CNN_CROP_MAX)))
    if width < 1:
        raise ValueError(
            f"snippet of {ell_ms:.1f} ms (incl. padding) is too short for the crop window"
        )
    return width


def cnn_finish(
    channels: np.ndarray,
    ell_ms: float,
    duration_ms: float,
    mode: Mode,
    stats: DatasetStats | None,
    rng: Rng | None = None,
    per_spectrogram_norm: bool = False,
) -> CnnInput:
    """Augment/normalize a channel stack into a fixed-shape network input."""
    if mode is Mode.TRAIN and rng is None:
        raise ValueError("training mode needs an Rng")
    if stats is None and not per_spectrogram_norm:
        raise ValueError("dataset stats required unless per-spectrogram normalization is on")
    gen = rng.generator() if rng is not None else None
    ch = channels

    if mode is Mode.TRAIN:
        shift = int(gen.integers(-CNN_TIME_SHIFT_MAX, CNN_TIME_SHIFT_MAX + 1))
        ch = _shift_replicate(ch, shift, axis=2)

    width = _crop_width(ell_ms)
    if ch.shape[2] < width:
        raise ValueError(f"only {ch.shape[2]} spectrogram columns for a {width}-column crop")
    ch = _center_crop(ch, width)

    smooth, db = ch[0], ch[1]
    if per_spectrogram_norm:
        std = float(smooth.std())
        if std == 0:
            raise ValueError("constant smooth spectrogram cannot be self-normalized")
        smooth = (smooth - float(smooth.mean())) / std
    else:
        smooth = (smooth - stats.mean[0]) / stats.std[0]
    db = (db - stats.mean[1]) / stats.std[1] if stats is not None else db
    ch = np.stack([smooth, db])

    pad_total = CNN_PADDED_WIDTH - width
    ch = np.pad(ch, ((0, 0), (0, 0), (pad_total // 2, pad_total - pad_total // 2)), mode="edge")

    if mode is Mode.EVAL:
        ch = _center_crop(ch, CNN_EVAL_WIDTH)
    else:
        new_width = int(gen.integers(CNN_RESCALE_RANGE[0], CNN_RESCALE_RANGE[1] + 1))
        ch = ch @ linear_resample_matrix(CNN_PADDED_WIDTH, new_width).T
        ch = _center_crop(ch, CNN_TRAIN_WIDTH)
        freq_shift = int(gen.integers(-CNN_FREQ_SHIFT_MAX, CNN_FREQ_SHIFT_MAX + 1))
        ch = _shift_replicate(ch, freq_shift, axis=1)
        ch = ch + gen.normal(0.0, CNN_NOISE_STD, size=ch.shape)

    t = relative_duration(duration_ms)
    time_plane = np.full((1,) + ch.shape[1:], t)
    return CnnInput(array=np.concatenate([ch, time_plane], axis=0))


def cnn_preprocess(
    snippet: CallSnippet,
    mode: Mode,
    stats: DatasetStats | None,
    rng: Rng | None = None,
    per_spectrogram_norm: bool = False,
) -> CnnInput:
    """Full convolutional-classifier pipeline for one snippet.

    Evaluation output is always 3x201x170; training output is 3x201x150
    after random time translation, rescaling, frequency shift and noise.
    """
    channels, ell_ms = cnn_channels(snippet)
    return cnn_finish(
        channels, ell_ms, snippet.duration_ms, mode, stats, rng, per_spectrogram_norm
    )


def channels_stats(pairs) -> DatasetStats:
    """DatasetStats from an iterable of (channels, padded-length-ms) pairs.

    Values are taken at the point of the pipeline where normalization
    happens (after the deterministic center crop). Population statistics;
    zero variance in either channel is an error.
    """
    total = np.zeros(2)
    total_sq = np.zeros(2)
    count = 0
    for channels, ell_ms in pairs:
        channels = np.asarray(channels, dtype=np.float64)
        cropped = _center_crop(channels, min(_crop_width(ell_ms), channels.shape[2]))
        total += cropped.sum(axis=(1, 2))
        total_sq += (cropped**2).sum(axis=(1, 2))
        count += cropped.shape[1] * cropped.shape[2]
    if count == 0:
        raise ValueError("cannot compute stats of an empty dataset")
    mean = total / count
    var = total_sq / count - mean**2
    if np.any(var <= 0):
        raise ValueError("zero variance in a spectrogram channel; dataset is degenerate")
    return DatasetStats(mean=mean, std=np.sqrt(var))


def compute_stats(snippets: list[CallSnippet]) -> DatasetStats:
    """Per-channel global mean/std of a snippet set's pre-normalization values."""
    if not snippets:
        raise ValueError("cannot compute stats of an empty dataset")
    return channels_stats(cnn_channels(s) for s in snippets)
