"""scikit-learn style wrappers around the detector and the two classifiers.

These give the package a familiar surface (get_params/set_params,
fit/predict/transform) so it composes with sklearn tooling; the underlying
functional modules stay importable on their own.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .calls import CallClass
from .detection import CallEvent, CallSnippet, DetectionParams, detect_calls
from .models import (
    CnnArchConfig,
    FnnArchConfig,
    build_custom_cnn,
    build_fnn,
)
from .nnkit import TrainConfig, predict_batch, train
from .preprocess import (
    Mode,
    cnn_preprocess,
    compute_stats,
    fnn_preprocess,
)
from .rng import Rng


class UsvDetector(BaseEstimator):
    """Threshold detector as a stateless transformer.

    fit is a no-op (the detector has no trainable state); predict maps one
    Recording to its event list, transform maps a list of Recordings to a
    list of event lists.
    """

    def __init__(
        self,
        entropy_threshold: float = 3.5,
        ratio_threshold: float = 2.0,
        gap_fuse_steps: int = 5,
        min_len_steps: int = 2,
        band_low_hz: float = 40_000.0,
        band_high_hz: float = 110_000.0,
        snippet_pad_ms: float = 10.0,
    ):
        self.entropy_threshold = entropy_threshold
        self.ratio_threshold = ratio_threshold
        self.gap_fuse_steps = gap_fuse_steps
        self.min_len_steps = min_len_steps
        self.band_low_hz = band_low_hz
        self.band_high_hz = band_high_hz
        self.snippet_pad_ms = snippet_pad_ms

    def detection_params(self) -> DetectionParams:
        return DetectionParams(
            entropy_threshold=self.entropy_threshold,
            ratio_threshold=self.ratio_threshold,
            gap_fuse_steps=self.gap_fuse_steps,
            min_len_steps=self.min_len_steps,
            band_low_hz=self.band_low_hz,
            band_high_hz=self.band_high_hz,
            snippet_pad_ms=self.snippet_pad_ms,
        )

    def fit(self, X=None, y=None):
        return self

    def predict(self, recording) -> list[CallEvent]:
        return detect_calls(recording, self.detection_params())

    def transform(self, recordings) -> list[list[CallEvent]]:
        return [self.predict(r) for r in recordings]


class _BaseUsvClassifier(BaseEstimator, ClassifierMixin):
    classes_ = np.arange(5)

    def _check_fitted(self):
        if getattr(self, "model_", None) is None:
            raise RuntimeError("classifier is not fitted")

    def predict_proba(self, X: list[CallSnippet]) -> np.ndarray:
        self._check_fitted()
        inputs = [self._eval_input(s) for s in X]
        preds = predict_batch(self.model_, inputs)
        return np.stack([p.pseudo_probabilities for p in preds])

    def predict(self, X: list[CallSnippet]) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def predictions(self, X: list[CallSnippet]):
        """Full ClassPrediction objects (probabilities plus confidence)."""
        self._check_fitted()
        return predict_batch(self.model_, [self._eval_input(s) for s in X])


class FnnUsvClassifier(_BaseUsvClassifier):
    """Y-shaped fully connected classifier on 48x8 spectrogram features.

    Expects CallSnippets extracted with 10 ms padding.
    """

    def __init__(
        self,
        hidden: tuple[int, int, int] = (126, 96, 64),
        fusion: int = 48,
        learning_rate: float = 1e-4,
        weight_decay: float = 1e-4,
        epochs: int = 40,
        batch_size: int = 32,
        seed: int = 0,
        dtype: str = "float64",
    ):
        self.hidden = hidden
        self.fusion = fusion
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.dtype = dtype

    def _eval_input(self, snippet: CallSnippet) -> np.ndarray:
        return fnn_preprocess(snippet, Mode.EVAL).vector()

    def fit(self, X: list[CallSnippet], y):
        rng = Rng(self.seed).split(1)
        dataset = [
            (fnn_preprocess(s, Mode.TRAIN, rng.split(i)).vector(), CallClass(int(label)))
            for i, (s, label) in enumerate(zip(X, y))
        ]
        self.model_ = build_fnn(FnnArchConfig(hidden=tuple(self.hidden), fusion=self.fusion, seed=self.seed))
        self.train_config_ = TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            dtype=self.dtype,
        )
        self.loss_history_ = train(self.model_, dataset, self.train_config_)
        return self


class CnnUsvClassifier(_BaseUsvClassifier):
    """Residual CNN on full-resolution dual-channel spectrograms.

    Expects CallSnippets extracted with 60 ms padding. Dataset
    normalization statistics are computed on the fit data and reused at
    predict time.
    """

    def __init__(
        self,
        stage_channels: tuple[int, int, int] = (16, 32, 64),
        blocks_per_stage: int = 2,
        stem_stride: int = 3,
        learning_rate: float = 1e-3,
        weight_decay: float = 1e-4,
        epochs: int = 10,
        batch_size: int = 8,
        seed: int = 0,
        dtype: str = "float64",
        per_spectrogram_norm: bool = False,
    ):
        self.stage_channels = stage_channels
        self.blocks_per_stage = blocks_per_stage
        self.stem_stride = stem_stride
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.dtype = dtype
        self.per_spectrogram_norm = per_spectrogram_norm

    def _eval_input(self, snippet: CallSnippet) -> np.ndarray:
        return cnn_preprocess(
            snippet, Mode.EVAL, self.stats_, per_spectrogram_norm=self.per_spectrogram_norm
        ).array

    def fit(self, X: list[CallSnippet], y):
        self.stats_ = compute_stats(list(X))
        rng = Rng(self.seed).split(1)
        dataset = [
            (
                cnn_preprocess(
                    s,
                    Mode.TRAIN,
                    self.stats_,
                    rng.split(i),
                    per_spectrogram_norm=self.per_spectrogram_norm,
                ).array.astype(np.float32),
                CallClass(int(label)),
            )
            for i, (s, label) in enumerate(zip(X, y))
        ]
        arch = CnnArchConfig(
            stage_channels=tuple(self.stage_channels),
            blocks_per_stage=self.blocks_per_stage,
            stem_stride=self.stem_stride,
            seed=self.seed,
        )
        self.model_ = build_custom_cnn(arch)
        self.train_config_ = TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            dtype=self.dtype,
        )
        self.loss_history_ = train(self.model_, dataset, self.train_config_)
        self.mean_time_feature_ = float(
            np.mean([min(s.duration_ms, 150.0) / 150.0 for s in X])
        )
        return self
