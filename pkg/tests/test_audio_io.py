import struct

import numpy as np
import pytest

from usvkit.audio_io import Recording, WavFormatError, load_wav, write_wav


def _wav_bytes(samples_i16: np.ndarray, rate: int = 250_000, channels: int = 1) -> bytes:
    data = samples_i16.astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, channels, rate, rate * 2 * channels, 2 * channels, 16)
    header += b"data" + struct.pack("<I", len(data))
    return header + data


def test_constant_16384_scales_to_half(tmp_path):
    path = tmp_path / "const.wav"
    path.write_bytes(_wav_bytes(np.full(1000, 16384, dtype=np.int16)))
    rec = load_wav(path)
    assert np.all(rec.samples == 0.5)


def test_sample_rate_from_header(tmp_path):
    path = tmp_path / "rate.wav"
    path.write_bytes(_wav_bytes(np.zeros(100, dtype=np.int16), rate=250_000))
    assert load_wav(path).sample_rate_hz == 250_000


def test_round_trip_within_one_lsb(tmp_path):
    gen = np.random.default_rng(0)
    rec = Recording("rt", gen.uniform(-1, 1, 5000), 250_000)
    path = tmp_path / "rt.wav"
    write_wav(rec, path)
    back = load_wav(path)
    assert back.sample_rate_hz == rec.sample_rate_hz
    assert back.id == "rt"
    assert np.max(np.abs(back.samples - rec.samples)) <= 2.0**-15


def test_second_write_is_byte_identical(tmp_path):
    gen = np.random.default_rng(1)
    rec = Recording("x", gen.uniform(-1, 1, 3000), 250_000)
    p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
    write_wav(rec, p1)
    write_wav(load_wav(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_zero_second_recording_size(tmp_path):
    rec = Recording("z", np.zeros(250_000), 250_000)
    path = tmp_path / "z.wav"
    write_wav(rec, path)
    assert path.stat().st_size == 44 + 2 * 250_000
    assert np.all(load_wav(path).samples == 0.0)


def test_peak_one_stores_32767(tmp_path):
    rec = Recording("p", np.array([0.0, 1.0, -1.0]), 250_000)
    path = tmp_path / "p.wav"
    write_wav(rec, path)
    raw = np.frombuffer(path.read_bytes()[44:], dtype="<i2")
    assert raw[1] == 32767
    assert raw[2] == -32768


def test_out_of_range_amplitudes_rejected(tmp_path):
    rec = Recording("o", np.array([0.0, 1.5]), 250_000)
    with pytest.raises(ValueError):
        write_wav(rec, tmp_path / "o.wav")


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_wav("/nonexistent/nope.wav")


def test_malformed_riff(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"not a wav file at all, definitely not long enough? " * 3)
    with pytest.raises(WavFormatError):
        load_wav(path)


def test_stereo_rejected(tmp_path):
    path = tmp_path / "stereo.wav"
    path.write_bytes(_wav_bytes(np.zeros(200, dtype=np.int16), channels=2))
    with pytest.raises(WavFormatError, match="mono"):
        load_wav(path)


def test_unsupported_encoding_rejected(tmp_path):
    # format tag 6 = a-law
    data = np.zeros(100, dtype=np.int16).tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 6, 1, 250_000, 500_000, 2, 16)
    header += b"data" + struct.pack("<I", len(data))
    path = tmp_path / "alaw.wav"
    path.write_bytes(header + data)
    with pytest.raises(WavFormatError, match="unsupported"):
        load_wav(path)


@pytest.mark.parametrize("bits", [8, 24, 32])
def test_integer_widths_load(tmp_path, bits):
    rate = 250_000
    if bits == 8:
        payload = np.array([128, 255, 0, 192], dtype=np.uint8).tobytes()
        expected = np.array([0.0, 127 / 128, -1.0, 0.5])
    elif bits == 24:
        vals = [0, 1 << 22, -(1 << 23)]
        payload = b"".join(int(v & 0xFFFFFF).to_bytes(3, "little") for v in vals)
        expected = np.array([0.0, 0.5, -1.0])
    else:
        payload = np.array([0, 1 << 30, -(1 << 31)], dtype="<i4").tobytes()
        expected = np.array([0.0, 0.5, -1.0])
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, rate, rate * bits // 8, bits // 8, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    path = tmp_path / f"w{bits}.wav"
    path.write_bytes(header + payload)
    assert np.allclose(load_wav(path).samples, expected)


def test_float32_loads(tmp_path):
    payload = np.array([0.25, -0.75], dtype="<f4").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 1, 250_000, 1_000_000, 4, 32)
    header += b"data" + struct.pack("<I", len(payload))
    path = tmp_path / "f32.wav"
    path.write_bytes(header + payload)
    rec = load_wav(path)
    assert np.allclose(rec.samples, [0.25, -0.75])
    assert np.all(np.isfinite(rec.samples))


def test_recording_invariants():
    with pytest.raises(ValueError):
        Recording("bad", np.array([]), 250_000)
    with pytest.raises(ValueError):
        Recording("bad", np.array([np.nan]), 250_000)
    with pytest.raises(ValueError):
        Recording("bad", np.zeros(10), 0)
