"""Reading and writing mono PCM WAV recordings.

A deliberately small RIFF parser: it accepts the encodings produced by
common bioacoustics recorders (8/16/24/32-bit integer PCM and 32-bit float,
single channel) and rejects everything else loudly instead of guessing.
Integer samples are rescaled to [-1, 1] by the type's max magnitude
(e.g. 32768 for 16-bit), floats are taken as-is.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CANONICAL_RATE_HZ = 250_000

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    """Raised for files that are not mono PCM WAV in a supported encoding."""


@dataclass(frozen=True)
class Recording:
    """A mono waveform with its sample rate.

    Immutable after construction; amplitudes are float64 and nominally in
    [-1, 1] (loaded integer PCM always is; synthetic or rescaled data may
    exceed the range, which only matters when writing back to disk).
    """

    id: str
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def _read_chunks(data: bytes) -> dict[bytes, tuple[int, int]]:
    """Map chunk id -> (offset, size) for the top-level RIFF chunks."""
    chunks: dict[bytes, tuple[int, int]] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        chunks.setdefault(cid, (pos + 8, size))
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    return chunks


def load_wav(path: str | Path) -> Recording:
    """Read a mono PCM/float WAV file into a Recording.

    Raises FileNotFoundError for missing files and WavFormatError for
    malformed RIFF structure, multi-channel audio or unsupported encodings.
    Stereo is rejected rather than downmixed: the detection features assume
    a single microphone.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 44 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    chunks = _read_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise WavFormatError(f"{path}: missing fmt or data chunk")

    fmt_off, fmt_size = chunks[b"fmt "]
    if fmt_size < 16:
        raise WavFormatError(f"{path}: truncated fmt chunk")
    fmt_tag, n_channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, fmt_off)
    if fmt_tag == _FORMAT_EXTENSIBLE and fmt_size >= 40:
        # sub-format GUID starts with the effective format tag
        (fmt_tag,) = struct.unpack_from("<H", data, fmt_off + 24)
    if n_channels != 1:
        raise WavFormatError(f"{path}: {n_channels} channels, expected mono")
    if rate <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {rate}")

    data_off, data_size = chunks[b"data"]
    data_size = min(data_size, len(data) - data_off)
    raw = data[data_off : data_off + data_size]

    if fmt_tag == _FORMAT_PCM and bits == 8:
        # 8-bit WAV is unsigned with midpoint 128
        samples = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif fmt_tag == _FORMAT_PCM and bits == 16:
        samples = np.frombuffer(raw[: len(raw) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    elif fmt_tag == _FORMAT_PCM and bits == 24:
        b = np.frombuffer(raw[: len(raw) // 3 * 3], dtype=np.uint8).reshape(-1, 3)
        vals = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        samples = vals.astype(np.float64) / float(1 << 23)
    elif fmt_tag == _FORMAT_PCM and bits == 32:
        samples = np.frombuffer(raw[: len(raw) // 4 * 4], dtype="<i4").astype(np.float64) / float(
            1 << 31
        )
    elif fmt_tag == _FORMAT_FLOAT and bits == 32:
        samples = np.frombuffer(raw[: len(raw) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported encoding (format {fmt_tag}, {bits}-bit)")

    if samples.size == 0:
        raise WavFormatError(f"{path}: empty data chunk")
    if not np.all(np.isfinite(samples)):
        raise WavFormatError(f"{path}: non-finite float samples")
    return Recording(id=path.stem, samples=samples, sample_rate_hz=int(rate))


def write_wav(recording: Recording, path: str | Path) -> None:
    """Write a Recording as 16-bit PCM mono WAV.

    Amplitudes must be within [-1, 1]; quantization is round-to-nearest with
    2^15 full-scale, so load_wav(write_wav(r)) matches r within one LSB and
    a second write of the reloaded data is byte-identical.
    """
    samples = recording.samples
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    if peak > 1.0:
        raise ValueError(f"amplitudes exceed [-1, 1] (peak {peak:.6g}); rescale before writing")
    quantized = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")

    data_bytes = quantized.tobytes()
    rate = recording.sample_rate_hz
    header = b"RIFF" + struct.pack("<I", 36 + len(data_bytes)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, _FORMAT_PCM, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(data_bytes))
    Path(path).write_bytes(header + data_bytes)
