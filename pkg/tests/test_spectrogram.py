import json
from pathlib import Path

import numpy as np
import pytest

from usvkit.audio_io import Recording
from usvkit.spectrogram import (
    DETECTION_STFT,
    CNN_STFT,
    Scale,
    SpectrogramGrid,
    StftParams,
    stft_energy,
    to_db,
    tukey_window,
)

from conftest import tone_recording
from oracles import dft_energy_direct

FIXTURES = Path(__file__).parent / "data"


def test_tukey_shape_zero_is_rectangular():
    assert np.all(tukey_window(64, 0.0) == 1.0)


def test_tukey_shape_one_is_hann():
    n = 128
    hann = 0.5 * (1 - np.cos(2 * np.pi * np.arange(n) / (n - 1)))
    assert np.allclose(tukey_window(n, 1.0), hann, atol=1e-12)


def test_tukey_matches_reference_fixture():
    # reference values computed once with scipy.signal.windows.tukey(256, 0.25)
    reference = np.array(json.loads((FIXTURES / "tukey_256_shape025.json").read_text()))
    ours = tukey_window(256, 0.25)
    assert np.max(np.abs(ours - reference)) < 1e-12


def test_tukey_validation():
    with pytest.raises(ValueError):
        tukey_window(64, 1.5)
    with pytest.raises(ValueError):
        tukey_window(1, 0.5)


def test_default_dt_is_1_024_ms():
    rec = tone_recording(60_000, duration_s=0.05)
    grid = stft_energy(rec, DETECTION_STFT)
    assert grid.dt_s == pytest.approx(1.024e-3)
    assert grid.df_hz == pytest.approx(976.5625)
    assert grid.n_freqs == 129


def test_cnn_params_give_201_bins_and_1ms():
    rec = tone_recording(60_000, duration_s=0.05)
    grid = stft_energy(rec, CNN_STFT)
    assert grid.n_freqs == 201
    assert grid.dt_s == pytest.approx(1.0e-3)


def test_zero_signal_gives_zero_grid():
    rec = Recording("z", np.zeros(10_000), 250_000)
    grid = stft_energy(rec)
    assert np.all(grid.values == 0.0)


def test_pure_tone_peak_bin_and_dft_oracle():
    rec = tone_recording(60_000, duration_s=0.02)
    grid = stft_energy(rec, DETECTION_STFT)
    assert np.all(grid.values.argmax(axis=1) == 61)
    # first segment against the O(n^2) DFT
    window = tukey_window(256, 0.25)
    frame = rec.samples[:256] * window
    oracle = dft_energy_direct(frame, 256)
    rel = np.max(np.abs(grid.values[0] - oracle)) / oracle.max()
    assert rel < 1e-9


def test_column_count_formula():
    rec = tone_recording(50_000, duration_s=0.01)  # 2500 samples
    for params in (DETECTION_STFT, CNN_STFT, StftParams(256, 512, 128, 0.25)):
        grid = stft_energy(rec, params)
        expected = (rec.samples.size - params.segment_length) // params.hop + 1
        assert grid.n_times == expected


def test_too_short_recording_rejected():
    rec = Recording("short", np.zeros(100), 250_000)
    with pytest.raises(ValueError, match="short"):
        stft_energy(rec, DETECTION_STFT)


def test_parseval_rectangular_window():
    gen = np.random.default_rng(3)
    rec = Recording("n", gen.normal(0, 0.1, 2048), 250_000)
    params = StftParams(segment_length=256, dft_length=256, overlap=0, tukey_shape=0.0)
    grid = stft_energy(rec, params)
    weights = np.full(129, 2.0)
    weights[0] = weights[-1] = 1.0
    for col in range(grid.n_times):
        segment = rec.samples[col * 256 : (col + 1) * 256]
        spectral = float((grid.values[col] * weights).sum())
        direct = 256.0 * float((segment**2).sum())
        assert abs(spectral - direct) / direct < 1e-9


def test_to_db_clip_floor():
    grid = SpectrogramGrid(np.array([[1.0, 1e-9, 1e-30]]), dt_s=1e-3, df_hz=100.0)
    out = to_db(grid, 60.0)
    assert out.scale is Scale.DECIBEL
    assert out.values.max() - out.values.min() <= 60.0 + 1e-12
    assert out.values.min() >= out.values.max() - 60.0 - 1e-12


def test_to_db_uniform_grid_range_zero():
    grid = SpectrogramGrid(np.full((3, 4), 2.5), dt_s=1e-3, df_hz=100.0)
    out = to_db(grid, 80.0)
    assert np.ptp(out.values) == 0.0


def test_to_db_hand_computed_example():
    grid = SpectrogramGrid(np.array([[1.0, 10.0, 100.0]]), dt_s=1e-3, df_hz=100.0)
    out = to_db(grid, 10.0)
    relative = out.values - out.values.max()
    assert np.allclose(relative, [[-10.0, -10.0, 0.0]], atol=1e-12)


def test_to_db_monotone():
    gen = np.random.default_rng(7)
    energy = gen.uniform(0, 10, size=(20, 30))
    energy[0, 0] = 0.0
    out = to_db(SpectrogramGrid(energy, 1e-3, 100.0), 60.0)
    a, b = energy.reshape(-1), out.values.reshape(-1)
    order = np.argsort(a)
    assert np.all(np.diff(b[order]) >= -1e-12)


def test_to_db_requires_energy_scale():
    grid = SpectrogramGrid(np.ones((2, 2)), 1e-3, 100.0)
    db = to_db(grid, 60.0)
    with pytest.raises(ValueError):
        to_db(db, 60.0)


def test_all_zero_grid_to_db():
    grid = SpectrogramGrid(np.zeros((3, 5)), 1e-3, 100.0)
    out = to_db(grid, 60.0)
    assert np.all(out.values == 0.0)


def test_stft_params_validation():
    with pytest.raises(ValueError):
        StftParams(segment_length=256, dft_length=128)
    with pytest.raises(ValueError):
        StftParams(segment_length=256, dft_length=256, overlap=256)
    with pytest.raises(ValueError):
        StftParams(tukey_shape=2.0)
