import numpy as np
import pytest

from usvkit.audio_io import Recording
from usvkit.detection import extract_snippet
from usvkit.preprocess import CNN_PAD_MS, FNN_PAD_MS
from usvkit.rng import Rng
from usvkit.synth import SynthCorpusConfig, generate_recording

RATE = 250_000


@pytest.fixture(scope="session")
def easy_recording():
    """One easy-preset recording with ground truth, shared across tests."""
    config = SynthCorpusConfig.easy(seed=101)
    return generate_recording(config, "fixture", rng=Rng(101))


@pytest.fixture(scope="session")
def small_labeled_snippets():
    """~60 labeled calls from the easy preset, both padding variants."""
    config = SynthCorpusConfig.easy(seed=202)
    root = Rng(202)
    fnn, cnn, labels = [], [], []
    for i in range(3):
        recording, truth = generate_recording(config, f"small{i}", rng=root.split(i))
        for event, call_class in truth:
            fnn.append(extract_snippet(recording, event, FNN_PAD_MS))
            cnn.append(extract_snippet(recording, event, CNN_PAD_MS))
            labels.append(call_class)
    return fnn, cnn, labels


def tone_recording(freq_hz: float, duration_s: float = 0.1, rate: int = RATE, amplitude: float = 0.8):
    t = np.arange(int(duration_s * rate)) / rate
    return Recording("tone", amplitude * np.sin(2 * np.pi * freq_hz * t), rate)
