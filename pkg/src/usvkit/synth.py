"""Ground-truthed synthetic call corpora.

Generates recordings with the five call types embedded in configurable
noise, as a verifiable stand-in for lab data: every generated call is
constructed to satisfy its class definition (modulation span, step size,
component independence, duration), and the exact event boundaries are
returned alongside the audio. Class realizations are parameterized
families, not imitations of animal acoustics; the "easy" preset keeps the
classes well separated for quantitative tests, the "hard" preset lets
parameter ranges touch their class boundaries and lowers the SNR.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio_io import Recording, write_wav
from .calls import CLASS_LABELS, LABEL_TO_CLASS, CallClass
from .detection import CallEvent
from .rng import Rng

FLAT_MAX_SPAN_HZ = 6_000.0
MODULATED_MIN_SPAN_HZ = 6_000.0
STEP_MIN_JUMP_HZ = 10_000.0
SHORT_MAX_MS = 5.0
RAMP_MS = 1.0


@dataclass(frozen=True)
class SynthCallSpec:
    """Parameters of one synthetic call; validated against its class rules."""

    call_class: CallClass
    onset_s: float
    duration_ms: float
    base_freq_hz: float
    modulation_depth_hz: float = 0.0
    amplitude: float = 0.5
    step_offset_hz: float = 0.0  # FrequencyStep: signed jump at the midpoint
    second_freq_hz: float = 0.0  # Composite: simultaneous second component

    def __post_init__(self) -> None:
        if self.duration_ms <= 0 or self.amplitude <= 0:
            raise ValueError("duration_ms and amplitude must be positive")
        c = self.call_class
        if c is CallClass.FLAT and not self.modulation_depth_hz < FLAT_MAX_SPAN_HZ:
            raise ValueError("flat calls must modulate by less than 6 kHz")
        if c is CallClass.MODULATED and not self.modulation_depth_hz > MODULATED_MIN_SPAN_HZ:
            raise ValueError("modulated calls must modulate by more than 6 kHz")
        if c is CallClass.SHORT and not self.duration_ms < SHORT_MAX_MS:
            raise ValueError("short calls must last less than 5 ms")
        if c is CallClass.FREQUENCY_STEP and abs(self.step_offset_hz) < STEP_MIN_JUMP_HZ:
            raise ValueError("frequency steps must jump by at least 10 kHz")
        if c is CallClass.COMPOSITE:
            if self.second_freq_hz <= 0:
                raise ValueError("composite calls need a second component frequency")
            ratio = self.second_freq_hz / self.base_freq_hz
            if abs(ratio - round(ratio)) < 0.05 or abs(1 / ratio - round(1 / ratio)) < 0.05:
                raise ValueError("composite components must be harmonically independent")

    @property
    def end_s(self) -> float:
        return self.onset_s + self.duration_ms / 1000.0


def _tone(freq_hz: np.ndarray, rate: int) -> np.ndarray:
    phase = 2.0 * np.pi * np.cumsum(freq_hz) / rate
    return np.sin(phase)


def _envelope(n: int, rate: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(int(round(RAMP_MS / 1000.0 * rate)), n // 2)
    if ramp > 0:
        up = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
        env[:ramp] = up
        env[-ramp:] = up[::-1]
    return env


def generate_call(spec: SynthCallSpec, rate: int) -> np.ndarray:
    """Render one call as a frequency-trajectory sinusoid with 1 ms ramps."""
    n = int(round(spec.duration_ms / 1000.0 * rate))
    if n < 2:
        raise ValueError("call too short for the sample rate")
    u = np.linspace(0.0, 1.0, n)  # normalized time in [0, 1]
    c = spec.call_class

    if c in (CallClass.FLAT, CallClass.SHORT):
        # linear drift spanning modulation_depth_hz in total
        freq = spec.base_freq_hz + spec.modulation_depth_hz * (u - 0.5)
        wave = _tone(freq, rate)
    elif c is CallClass.MODULATED:
        # chevron: rises to base + depth at the midpoint and falls back
        freq = spec.base_freq_hz + spec.modulation_depth_hz * np.sin(np.pi * u)
        wave = _tone(freq, rate)
    elif c is CallClass.FREQUENCY_STEP:
        # instantaneous jump at the midpoint, no time gap, phase-continuous
        freq = np.where(u < 0.5, spec.base_freq_hz, spec.base_freq_hz + spec.step_offset_hz)
        wave = _tone(freq, rate)
    elif c is CallClass.COMPOSITE:
        drift = spec.modulation_depth_hz * (u - 0.5)
        wave = 0.5 * (
            _tone(spec.base_freq_hz + drift, rate) + _tone(spec.second_freq_hz + drift, rate)
        )
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown class {c}")

    return spec.amplitude * _envelope(n, rate) * wave


@dataclass(frozen=True)
class SynthCorpusConfig:
    """Recipe for one family of synthetic recordings."""

    calls_per_recording: int = 20
    class_weights: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    gap_min_s: float = 0.05
    gap_max_s: float = 0.12
    noise_floor_db: float = -40.0  # broadband white noise relative to call amplitude
    low_freq_noise_db: float = -20.0  # extra <40 kHz noise, same reference
    duration_range_ms: tuple[float, float] = (25.0, 70.0)
    short_duration_range_ms: tuple[float, float] = (2.0, 4.5)
    base_freq_range_hz: tuple[float, float] = (50_000.0, 90_000.0)
    flat_span_range_hz: tuple[float, float] = (500.0, 3_000.0)
    modulated_span_range_hz: tuple[float, float] = (10_000.0, 25_000.0)
    step_jump_range_hz: tuple[float, float] = (12_000.0, 22_000.0)
    composite_ratio_range: tuple[float, float] = (1.25, 1.45)
    amplitude_range: tuple[float, float] = (0.3, 0.7)
    sample_rate_hz: int = 250_000
    lead_s: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.class_weights) != 5:
            raise ValueError("class_weights needs five entries")
        if abs(sum(self.class_weights) - 1.0) > 1e-9:
            raise ValueError("class_weights must sum to 1")
        if self.gap_min_s < 0 or self.gap_max_s < self.gap_min_s:
            raise ValueError("invalid gap range")

    @classmethod
    def easy(cls, seed: int = 0, **overrides) -> "SynthCorpusConfig":
        """Cleanly separated classes over a -40 dB noise floor."""
        return cls(seed=seed, **overrides)

    @classmethod
    def hard(cls, seed: int = 0, **overrides) -> "SynthCorpusConfig":
        """Parameter ranges touching the class boundaries, noisier floor."""
        defaults = dict(
            noise_floor_db=-25.0,
            low_freq_noise_db=-12.0,
            duration_range_ms=(5.5, 90.0),
            short_duration_range_ms=(1.5, 4.9),
            flat_span_range_hz=(0.0, 5_900.0),
            modulated_span_range_hz=(6_100.0, 30_000.0),
            step_jump_range_hz=(10_000.0, 30_000.0),
            composite_ratio_range=(1.15, 1.6),
            amplitude_range=(0.1, 0.7),
        )
        defaults.update(overrides)
        return cls(seed=seed, **defaults)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SynthCorpusConfig":
        data = json.loads(text)
        for key, value in list(data.items()):
            if isinstance(value, list):
                data[key] = tuple(value)
        return cls(**data)


def _uniform(gen: np.random.Generator, lo_hi: tuple[float, float]) -> float:
    return float(gen.uniform(lo_hi[0], lo_hi[1]))


def sample_call_spec(
    config: SynthCorpusConfig, gen: np.random.Generator, onset_s: float
) -> SynthCallSpec:
    call_class = CallClass(int(gen.choice(5, p=np.asarray(config.class_weights))))
    base = _uniform(gen, config.base_freq_range_hz)
    amplitude = _uniform(gen, config.amplitude_range)
    kwargs = dict(
        call_class=call_class, onset_s=onset_s, base_freq_hz=base, amplitude=amplitude
    )
    if call_class is CallClass.SHORT:
        kwargs["duration_ms"] = _uniform(gen, config.short_duration_range_ms)
        kwargs["modulation_depth_hz"] = _uniform(gen, config.flat_span_range_hz)
        return SynthCallSpec(**kwargs)
    kwargs["duration_ms"] = _uniform(gen, config.duration_range_ms)
    if call_class is CallClass.FLAT:
        kwargs["modulation_depth_hz"] = _uniform(gen, config.flat_span_range_hz)
    elif call_class is CallClass.MODULATED:
        depth = _uniform(gen, config.modulated_span_range_hz)
        # keep the chevron peak inside the 40-110 kHz detection band
        kwargs["base_freq_hz"] = max(42_000.0, min(base, 108_000.0 - depth))
        kwargs["modulation_depth_hz"] = depth
    elif call_class is CallClass.FREQUENCY_STEP:
        jump = _uniform(gen, config.step_jump_range_hz)
        sign = 1.0 if gen.random() < 0.5 else -1.0
        # keep the landing frequency inside the 40-110 kHz detection band
        if base + sign * jump > 108_000 or base + sign * jump < 42_000:
            sign = -sign
        kwargs["step_offset_hz"] = sign * jump
    elif call_class is CallClass.COMPOSITE:
        ratio = _uniform(gen, config.composite_ratio_range)
        second = min(base * ratio, 108_000.0)
        kwargs["second_freq_hz"] = second
        kwargs["modulation_depth_hz"] = _uniform(gen, config.flat_span_range_hz)
    return SynthCallSpec(**kwargs)


def _lowpass_noise(gen: np.random.Generator, n: int, rate: int, cutoff_hz: float) -> np.ndarray:
    """Unit-variance white noise restricted to frequencies below cutoff_hz."""
    n_fft = 1 << (n - 1).bit_length()  # pad to a power of two; raw n can be FFT-hostile
    white = gen.standard_normal(n_fft)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / rate)
    spectrum[freqs >= cutoff_hz] = 0.0
    shaped = np.fft.irfft(spectrum, n=n_fft)[:n]
    std = float(shaped.std())
    return shaped / std if std > 0 else shaped


def generate_recording(
    config: SynthCorpusConfig, recording_id: str = "synth", rng: Rng | None = None
) -> tuple[Recording, list[tuple[CallEvent, CallClass]]]:
    """One recording with sampled calls and its sorted ground-truth list.

    Calls are laid out sequentially with gaps drawn from the configured
    range; white noise at the floor level plus low-frequency (<40 kHz)
    noise is added on top, exercising the detector's band-energy ratio.
    Raises if the schedule exceeds the derived recording length.
    """
    rng = rng if rng is not None else Rng(config.seed)
    gen = rng.generator()
    rate = config.sample_rate_hz

    specs: list[SynthCallSpec] = []
    t = config.lead_s
    for _ in range(config.calls_per_recording):
        t += _uniform(gen, (config.gap_min_s, config.gap_max_s))
        spec = sample_call_spec(config, gen, onset_s=t)
        specs.append(spec)
        t = spec.end_s
    total_s = t + config.lead_s
    n = int(round(total_s * rate))

    samples = np.zeros(n)
    truth: list[tuple[CallEvent, CallClass]] = []
    for spec in specs:
        wave = generate_call(spec, rate)
        i0 = int(round(spec.onset_s * rate))
        i1 = i0 + wave.size
        if i1 > n:
            raise ValueError("call schedule exceeds recording length")
        samples[i0:i1] += wave
        truth.append((CallEvent(spec.onset_s, i1 / rate), spec.call_class))

    ref = float(np.mean([s.amplitude for s in specs])) if specs else 0.5
    broadband = ref * 10.0 ** (config.noise_floor_db / 20.0)
    lowband = ref * 10.0 ** (config.low_freq_noise_db / 20.0)
    if broadband > 0:
        samples += broadband * gen.standard_normal(n)
    if lowband > 0:
        samples += lowband * _lowpass_noise(gen, n, rate, cutoff_hz=40_000.0)

    peak = float(np.max(np.abs(samples)))
    if peak > 1.0:
        samples /= peak * 1.0001  # headroom so 16-bit export stays in range
    recording = Recording(id=recording_id, samples=samples, sample_rate_hz=rate)
    truth.sort(key=lambda pair: pair[0].start_s)
    return recording, truth


def write_corpus(
    config: SynthCorpusConfig, n_recordings: int, out_dir: str | Path
) -> list[Path]:
    """Emit WAV files, a ground-truth CSV and the config JSON into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = Rng(config.seed)
    wav_paths: list[Path] = []
    rows: list[tuple[str, float, float, str]] = []
    for i in range(n_recordings):
        rec_id = f"rec_{i:04d}"
        recording, truth = generate_recording(config, rec_id, rng=root.split(i))
        path = out_dir / f"{rec_id}.wav"
        write_wav(recording, path)
        wav_paths.append(path)
        for event, call_class in truth:
            rows.append((rec_id, event.start_s, event.end_s, CLASS_LABELS[call_class]))
    with open(out_dir / "ground_truth.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["recording_id", "start_s", "end_s", "class"])
        for rec_id, start, end, label in rows:
            writer.writerow([rec_id, f"{start:.6f}", f"{end:.6f}", label])
    (out_dir / "config.json").write_text(config.to_json())
    return wav_paths


def load_ground_truth(path: str | Path) -> dict[str, list[tuple[CallEvent, CallClass]]]:
    """Read a ground-truth CSV back into per-recording event lists."""
    truth: dict[str, list[tuple[CallEvent, CallClass]]] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            event = CallEvent(float(row["start_s"]), float(row["end_s"]))
            truth.setdefault(row["recording_id"], []).append(
                (event, LABEL_TO_CLASS[row["class"]])
            )
    for events in truth.values():
        events.sort(key=lambda pair: pair[0].start_s)
    return truth
