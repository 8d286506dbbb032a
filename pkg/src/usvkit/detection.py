"""Entropy-based segmentation of recordings into call events.

For every spectrogram column, the Shannon entropy of the normalized
40-110 kHz band energy distribution separates tonal calls (low entropy)
from noise (high entropy), and the high-band/low-band energy ratio rejects
broadband low-frequency noise. Both are thresholded into a binary indicator
per time step, then short gaps are fused and too-short detections deleted.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio_io import Recording
from .spectrogram import DETECTION_STFT, Scale, SpectrogramGrid, StftParams, stft_energy

RATIO_EPS = 1e-12


@dataclass(frozen=True)
class DetectionParams:
    """Thresholds and post-processing constants of the detector.

    Defaults: entropy threshold 3.5 on the natural-log scale; ratio
    threshold 2.0, sitting above the ~1.8 reached by spectrally flat noise;
    gap fusion of 5 steps (~5.1 ms) bridging dropouts near quiet call
    endings; 2-step minimum length, below the 5 ms short-call duration
    bound. snippet_pad_ms is the detect-only extraction padding (the
    classifiers request their own: 10 ms flattened, 60 ms convolutional).
    """

    entropy_threshold: float = 3.5
    ratio_threshold: float = 2.0
    gap_fuse_steps: int = 5
    min_len_steps: int = 2
    band_low_hz: float = 40_000.0
    band_high_hz: float = 110_000.0
    snippet_pad_ms: float = 10.0

    def __post_init__(self) -> None:
        if not self.band_low_hz < self.band_high_hz:
            raise ValueError("band_low_hz must be below band_high_hz")
        for name in ("entropy_threshold", "ratio_threshold", "snippet_pad_ms"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.gap_fuse_steps < 0 or self.min_len_steps < 0:
            raise ValueError("gap_fuse_steps and min_len_steps must be non-negative")
        if self.snippet_pad_ms < 0:
            raise ValueError("snippet_pad_ms must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DetectionParams":
        data = json.loads(text)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown detection parameter(s): {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "DetectionParams":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class FeatureSeries:
    """Per-column detection features: entropy, band energies and their ratio."""

    entropy: np.ndarray
    high_energy: np.ndarray
    low_energy: np.ndarray
    ratio: np.ndarray
    dt_s: float
    n_band_bins: int

    def __post_init__(self) -> None:
        n = self.entropy.shape[0]
        for name in ("high_energy", "low_energy", "ratio"):
            if getattr(self, name).shape[0] != n:
                raise ValueError("feature series must share one length")


@dataclass(frozen=True)
class CallEvent:
    """Detected vocalization interval in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"invalid event ({self.start_s}, {self.end_s})")

    @property
    def duration_ms(self) -> float:
        return (self.end_s - self.start_s) * 1000.0

    def overlap_s(self, other: "CallEvent") -> float:
        return max(0.0, min(self.end_s, other.end_s) - max(self.start_s, other.start_s))


@dataclass(frozen=True)
class CallSnippet:
    """Waveform cut around one event, including symmetric padding.

    The padding absorbs the detector's boundary delays; at recording edges
    it is truncated, so the waveform can be shorter than duration + 2*pad.
    """

    event: CallEvent
    waveform: np.ndarray
    pad_ms: float
    sample_rate_hz: int
    duration_ms: float


def band_rows(grid: SpectrogramGrid, band_low_hz: float, band_high_hz: float) -> tuple[int, int]:
    """Inclusive [low, high] row range of the call band, nearest bin per edge.

    At the detection defaults (976.5625 Hz/bin, 40-110 kHz) this selects
    rows 41..113, i.e. 73 band bins.
    """
    lo = int(round(band_low_hz / grid.df_hz))
    hi = int(round(band_high_hz / grid.df_hz))
    if hi >= grid.n_freqs:
        raise ValueError(
            f"band edge {band_high_hz} Hz beyond grid Nyquist "
            f"({(grid.n_freqs - 1) * grid.df_hz:.1f} Hz)"
        )
    if lo > hi:
        raise ValueError("empty detection band")
    return lo, hi


def compute_features(grid: SpectrogramGrid, params: DetectionParams) -> FeatureSeries:
    """Entropy of the normalized band distribution plus band-energy ratio.

    Entropy uses the natural logarithm with 0*log(0) := 0; an all-zero band
    column gets the maximum-entropy value ln(B) so silence never looks
    tonal. The low band is every row below the call band; its energy is
    cushioned by a tiny epsilon in the ratio denominator.
    """
    if grid.scale is not Scale.ENERGY:
        raise ValueError("compute_features expects an energy-scale grid")
    lo, hi = band_rows(grid, params.band_low_hz, params.band_high_hz)
    band = grid.values[:, lo : hi + 1]
    low = grid.values[:, :lo]
    n_bins = band.shape[1]

    high_energy = band.sum(axis=1)
    low_energy = low.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = band / high_energy[:, None]
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    entropy = -plogp.sum(axis=1)
    entropy = np.where(high_energy > 0, entropy, np.log(n_bins))
    ratio = high_energy / (low_energy + RATIO_EPS)
    return FeatureSeries(
        entropy=entropy,
        high_energy=high_energy,
        low_energy=low_energy,
        ratio=ratio,
        dt_s=grid.dt_s,
        n_band_bins=n_bins,
    )


def indicator(features: FeatureSeries, params: DetectionParams) -> np.ndarray:
    """Binary per-step decision: 1 iff entropy <= T_H and ratio >= T_R."""
    active = (features.entropy <= params.entropy_threshold) & (
        features.ratio >= params.ratio_threshold
    )
    return active.astype(np.int8)


def fuse_and_filter(ind: np.ndarray, params: DetectionParams) -> list[tuple[int, int]]:
    """Runs of 1s as half-open step intervals, after gap fusion and deletion.

    Gaps strictly shorter than gap_fuse_steps are merged first; the
    resulting runs strictly shorter than min_len_steps are discarded.
    """
    ind = np.asarray(ind).astype(bool)
    if ind.size == 0:
        return []
    padded = np.concatenate(([False], ind, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    runs = list(zip(edges[0::2], edges[1::2]))

    fused: list[tuple[int, int]] = []
    for start, end in runs:
        if fused and start - fused[-1][1] < params.gap_fuse_steps:
            fused[-1] = (fused[-1][0], end)
        else:
            fused.append((start, end))
    return [(int(s), int(e)) for s, e in fused if e - s >= params.min_len_steps]


def detect_calls(
    recording: Recording,
    params: DetectionParams = DetectionParams(),
    stft_params: StftParams = DETECTION_STFT,
) -> list[CallEvent]:
    """Full detector: spectrogram, features, indicator, fusion, seconds."""
    grid = stft_energy(recording, stft_params)
    features = compute_features(grid, params)
    steps = fuse_and_filter(indicator(features, params), params)
    return [CallEvent(start_s=s * grid.dt_s, end_s=e * grid.dt_s) for s, e in steps]


def extract_snippet(recording: Recording, event: CallEvent, pad_ms: float) -> CallSnippet:
    """Cut the event's waveform with pad_ms of context on each side.

    The window is clamped to the recording edges; the unpadded duration is
    kept so classifiers can use it as the relative-duration feature.
    """
    rate = recording.sample_rate_hz
    n = recording.samples.size
    if event.start_s >= n / rate:
        raise ValueError(f"event starting at {event.start_s}s lies outside the recording")
    pad_s = pad_ms / 1000.0
    start = max(0, int(round((event.start_s - pad_s) * rate)))
    end = min(n, int(round((event.end_s + pad_s) * rate)))
    return CallSnippet(
        event=event,
        waveform=recording.samples[start:end],
        pad_ms=pad_ms,
        sample_rate_hz=rate,
        duration_ms=event.duration_ms,
    )


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of matching predicted events against ground truth."""

    n_truth: int
    n_predicted: int
    true_positives: int
    false_positives: int
    missed: int
    one_call_as_two: int
    two_calls_as_one: int
    recall: float
    precision: float
    mean_start_delay_ms: float
    mean_end_delay_ms: float


def _check_sorted_disjoint(events: list[CallEvent], name: str) -> None:
    for a, b in zip(events, events[1:]):
        if b.start_s < a.end_s:
            raise ValueError(f"{name} events overlap or are unsorted: {a} vs {b}")


def evaluate_detection(predicted: list[CallEvent], truth: list[CallEvent]) -> DetectionReport:
    """Greedy one-to-one matching by temporal overlap.

    Each prediction, in temporal order, is matched to the still-unmatched
    truth event it overlaps most. Unmatched predictions that overlap some
    truth count as "one call as two" (a call split into several
    detections); unmatched truths that overlap some prediction count as
    "two calls as one" (neighboring calls merged into one detection).
    Positive delays mean the predicted boundary is late.
    """
    _check_sorted_disjoint(predicted, "predicted")
    _check_sorted_disjoint(truth, "truth")

    t_starts = np.array([t.start_s for t in truth])
    t_ends = np.array([t.end_s for t in truth])

    def overlapping_truths(p: CallEvent) -> range:
        i0 = int(np.searchsorted(t_ends, p.start_s, side="right"))
        i1 = int(np.searchsorted(t_starts, p.end_s, side="left"))
        return range(i0, i1)

    truth_matched = [False] * len(truth)
    truth_touched = [False] * len(truth)
    pairs: list[tuple[int, int]] = []
    split_count = 0
    for pi, pred in enumerate(predicted):
        overlaps = [(pred.overlap_s(truth[ti]), ti) for ti in overlapping_truths(pred)]
        overlaps = [(o, ti) for o, ti in overlaps if o > 0]
        if not overlaps:
            continue
        for _, ti in overlaps:
            truth_touched[ti] = True
        # greatest overlap wins; prefer unmatched truths, then earlier ones, on ties
        _, _, neg_ti = max((o, not truth_matched[ti], -ti) for o, ti in overlaps)
        ti = -neg_ti
        if truth_matched[ti]:
            split_count += 1  # second prediction landing on an already-claimed call
        else:
            truth_matched[ti] = True
            pairs.append((pi, ti))

    merged_count = sum(
        1 for ti in range(len(truth)) if truth_touched[ti] and not truth_matched[ti]
    )

    tp = len(pairs)
    recall = tp / len(truth) if truth else 1.0
    precision = tp / len(predicted) if predicted else 1.0
    if pairs:
        start_delays = [(predicted[pi].start_s - truth[ti].start_s) * 1000 for pi, ti in pairs]
        end_delays = [(predicted[pi].end_s - truth[ti].end_s) * 1000 for pi, ti in pairs]
        mean_start = float(np.mean(start_delays))
        mean_end = float(np.mean(end_delays))
    else:
        mean_start = mean_end = 0.0
    return DetectionReport(
        n_truth=len(truth),
        n_predicted=len(predicted),
        true_positives=tp,
        false_positives=len(predicted) - tp,
        missed=len(truth) - tp,
        one_call_as_two=split_count,
        two_calls_as_one=merged_count,
        recall=recall,
        precision=precision,
        mean_start_delay_ms=mean_start,
        mean_end_delay_ms=mean_end,
    )
