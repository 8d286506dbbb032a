"""usvkit: detection, classification and review tooling for rodent
ultrasonic vocalization recordings.

The package splits into functional modules (audio_io, spectrogram,
detection, preprocess, nnkit, models, evaluation, interpret, synth,
pipeline, service) plus sklearn-style estimator wrappers in
`usvkit.estimators`.
"""

from .audio_io import Recording, load_wav, write_wav
from .calls import CallClass, ClassPrediction
from .detection import (
    CallEvent,
    CallSnippet,
    DetectionParams,
    detect_calls,
    evaluate_detection,
    extract_snippet,
)
from .estimators import CnnUsvClassifier, FnnUsvClassifier, UsvDetector
from .pipeline import CallRecord, PipelineConfig, run_pipeline
from .synth import SynthCorpusConfig, generate_recording, write_corpus

__version__ = "0.1.0"

__all__ = [
    "CallClass",
    "CallEvent",
    "CallRecord",
    "CallSnippet",
    "ClassPrediction",
    "CnnUsvClassifier",
    "DetectionParams",
    "FnnUsvClassifier",
    "PipelineConfig",
    "Recording",
    "SynthCorpusConfig",
    "UsvDetector",
    "detect_calls",
    "evaluate_detection",
    "extract_snippet",
    "generate_recording",
    "load_wav",
    "run_pipeline",
    "write_corpus",
    "write_wav",
]
