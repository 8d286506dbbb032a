"""End-to-end orchestration: detect, preprocess, classify, triage.

Produces one CallRecord per detected call. In fully automated mode every
call keeps its predicted class; in semi-automated mode calls whose
confidence falls below the triage threshold are flagged for manual review.
Records and manual labels persist in an append-only JSON-lines journal
that replays on restart.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .audio_io import Recording
from .calls import CLASS_LABELS, LABEL_TO_CLASS, CallClass, ClassPrediction
from .detection import DetectionParams, detect_calls, extract_snippet
from .models import load_classifier
from .nnkit import Model, predict_batch
from .preprocess import CNN_PAD_MS, FNN_PAD_MS, DatasetStats, Mode, cnn_preprocess, fnn_preprocess

logger = logging.getLogger(__name__)

CSV_HEADER = [
    "recording_id",
    "call_index",
    "start_s",
    "end_s",
    "duration_ms",
    "class",
    "p_flat",
    "p_modulated",
    "p_freq_step",
    "p_composite",
    "p_short",
    "confidence",
    "triage_status",
]


class TriageStatus(Enum):
    AUTO_ACCEPTED = "AutoAccepted"
    FLAGGED = "Flagged"
    MANUALLY_LABELED = "ManuallyLabeled"


class PipelineMode(Enum):
    FULLY_AUTOMATED = "FullyAutomated"
    SEMI_AUTOMATED = "SemiAutomated"


@dataclass(frozen=True)
class CallRecord:
    recording_id: str
    call_index: int
    start_s: float
    end_s: float
    duration_ms: float
    predicted_class: CallClass | None
    pseudo_probabilities: tuple[float, ...] | None
    confidence: float | None
    triage_status: TriageStatus
    manual_class: CallClass | None = None
    annotator: str | None = None
    labeled_at: float | None = None
    version: int = 0

    @property
    def call_id(self) -> str:
        return f"{self.recording_id}:{self.call_index}"

    def to_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "call_index": self.call_index,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "duration_ms": self.duration_ms,
            "predicted_class": CLASS_LABELS[self.predicted_class]
            if self.predicted_class is not None
            else None,
            "pseudo_probabilities": list(self.pseudo_probabilities)
            if self.pseudo_probabilities is not None
            else None,
            "confidence": self.confidence,
            "triage_status": self.triage_status.value,
            "manual_class": CLASS_LABELS[self.manual_class]
            if self.manual_class is not None
            else None,
            "annotator": self.annotator,
            "labeled_at": self.labeled_at,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CallRecord":
        return cls(
            recording_id=data["recording_id"],
            call_index=int(data["call_index"]),
            start_s=float(data["start_s"]),
            end_s=float(data["end_s"]),
            duration_ms=float(data["duration_ms"]),
            predicted_class=LABEL_TO_CLASS[data["predicted_class"]]
            if data.get("predicted_class")
            else None,
            pseudo_probabilities=tuple(data["pseudo_probabilities"])
            if data.get("pseudo_probabilities")
            else None,
            confidence=data.get("confidence"),
            triage_status=TriageStatus(data["triage_status"]),
            manual_class=LABEL_TO_CLASS[data["manual_class"]] if data.get("manual_class") else None,
            annotator=data.get("annotator"),
            labeled_at=data.get("labeled_at"),
            version=int(data.get("version", 0)),
        )


@dataclass(frozen=True)
class PipelineConfig:
    detection: DetectionParams = field(default_factory=DetectionParams)
    model_path: str | None = None
    triage_threshold: float = 0.7
    mode: PipelineMode = PipelineMode.SEMI_AUTOMATED

    def __post_init__(self) -> None:
        if not 0.0 <= self.triage_threshold <= 1.0:
            raise ValueError("triage_threshold must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "detection": json.loads(self.detection.to_json()),
            "model_path": self.model_path,
            "triage_threshold": self.triage_threshold,
            "mode": self.mode.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return cls(
            detection=DetectionParams(**data.get("detection", {})),
            model_path=data.get("model_path"),
            triage_threshold=data.get("triage_threshold", 0.7),
            mode=PipelineMode(data.get("mode", "SemiAutomated")),
        )


class LoadedClassifier:
    """A rebuilt model plus the preprocessing context stored alongside it."""

    def __init__(self, model: Model, arch_kind: str, stats: DatasetStats | None, extra: dict):
        self.model = model
        self.arch_kind = arch_kind
        self.stats = stats
        self.extra = extra

    @classmethod
    def from_file(cls, path: str | Path) -> "LoadedClassifier":
        model, meta = load_classifier(path)
        return cls(model, meta["arch"]["kind"], meta["stats"], meta.get("extra", {}))

    @property
    def snippet_pad_ms(self) -> float:
        return FNN_PAD_MS if self.arch_kind == "fnn" else CNN_PAD_MS

    def preprocess(self, snippet) -> np.ndarray:
        if self.arch_kind == "fnn":
            return fnn_preprocess(snippet, Mode.EVAL).vector()
        return cnn_preprocess(snippet, Mode.EVAL, self.stats).array

    def predict(self, snippets) -> list[ClassPrediction]:
        inputs = [self.preprocess(s) for s in snippets]
        return predict_batch(self.model, inputs)


def classify_recording(
    recording: Recording,
    classifier: LoadedClassifier,
    config: PipelineConfig,
) -> list[CallRecord]:
    events = detect_calls(recording, config.detection)
    if not events:
        return []
    snippets = [extract_snippet(recording, e, classifier.snippet_pad_ms) for e in events]
    predictions = classifier.predict(snippets)
    records = []
    for i, (event, pred) in enumerate(zip(events, predictions)):
        if config.mode is PipelineMode.SEMI_AUTOMATED and pred.confidence < config.triage_threshold:
            status = TriageStatus.FLAGGED
        else:
            status = TriageStatus.AUTO_ACCEPTED
        records.append(
            CallRecord(
                recording_id=recording.id,
                call_index=i,
                start_s=event.start_s,
                end_s=event.end_s,
                duration_ms=event.duration_ms,
                predicted_class=pred.predicted_class,
                pseudo_probabilities=tuple(float(v) for v in pred.pseudo_probabilities),
                confidence=pred.confidence,
                triage_status=status,
            )
        )
    return records


def run_pipeline(
    recordings: list[Recording],
    config: PipelineConfig,
    classifier: LoadedClassifier | None = None,
) -> tuple[list[CallRecord], dict[str, str]]:
    """Detect and classify every recording; per-recording failures are
    isolated and reported in the returned error map instead of aborting."""
    if classifier is None:
        if config.model_path is None:
            raise ValueError("config.model_path is not set and no classifier was passed")
        classifier = LoadedClassifier.from_file(config.model_path)
    records: list[CallRecord] = []
    errors: dict[str, str] = {}
    for recording in recordings:
        try:
            records.extend(classify_recording(recording, classifier, config))
        except Exception as exc:
            logger.exception("pipeline failed on %s", recording.id)
            errors[recording.id] = str(exc)
    return records, errors


def _fmt(value: float | None, time_like: bool = False) -> str:
    if value is None:
        return ""
    return f"{value:.6f}" if time_like else repr(float(value))


def export_csv(records: list[CallRecord], path: str | Path) -> None:
    """Write records with the fixed header; times use 6 decimals, other
    reals use full precision so a re-import reproduces them exactly."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for r in records:
            probs = r.pseudo_probabilities or (None,) * 5
            writer.writerow(
                [
                    r.recording_id,
                    r.call_index,
                    _fmt(r.start_s, time_like=True),
                    _fmt(r.end_s, time_like=True),
                    _fmt(r.duration_ms),
                    CLASS_LABELS[r.predicted_class] if r.predicted_class is not None else "",
                    *[_fmt(p) for p in probs],
                    _fmt(r.confidence),
                    r.triage_status.value,
                ]
            )


def read_csv(path: str | Path) -> list[CallRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            probs = [row[k] for k in ("p_flat", "p_modulated", "p_freq_step", "p_composite", "p_short")]
            records.append(
                CallRecord(
                    recording_id=row["recording_id"],
                    call_index=int(row["call_index"]),
                    start_s=float(row["start_s"]),
                    end_s=float(row["end_s"]),
                    duration_ms=float(row["duration_ms"]),
                    predicted_class=LABEL_TO_CLASS[row["class"]] if row["class"] else None,
                    pseudo_probabilities=tuple(float(p) for p in probs) if probs[0] else None,
                    confidence=float(row["confidence"]) if row["confidence"] else None,
                    triage_status=TriageStatus(row["triage_status"]),
                )
            )
    return records


class Journal:
    """Append-only JSON-lines store for call records and manual labels.

    Replaying the file reproduces the in-memory state exactly; `compact`
    rewrites it as one entry per live record. Writes are serialized by a
    lock (the single mutable resource of the service layer).
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.records: dict[str, CallRecord] = {}
        if self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with open(self.path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if entry["type"] == "record":
                    record = CallRecord.from_dict(entry["record"])
                    self.records[record.call_id] = record
                elif entry["type"] == "label":
                    self._apply_label(
                        entry["call_id"],
                        LABEL_TO_CLASS[entry["class"]],
                        entry["annotator"],
                        entry["timestamp"],
                    )

    def _append(self, entry: dict) -> None:
        with open(self.path, "a") as f:
            f.write(json.dumps(entry) + "\n")

    def add_records(self, records: list[CallRecord]) -> None:
        with self._lock:
            for record in records:
                self.records[record.call_id] = record
                self._append({"type": "record", "record": record.to_dict()})

    def _apply_label(
        self, call_id: str, call_class: CallClass, annotator: str, timestamp: float
    ) -> CallRecord:
        record = self.records[call_id]
        updated = replace(
            record,
            triage_status=TriageStatus.MANUALLY_LABELED,
            manual_class=call_class,
            annotator=annotator,
            labeled_at=timestamp,
            version=record.version + 1,
        )
        self.records[call_id] = updated
        return updated

    def label(
        self,
        call_id: str,
        call_class: CallClass,
        annotator: str,
        expected_version: int | None = None,
    ) -> CallRecord:
        """Apply a manual label; last write wins, but a stale
        expected_version is rejected so clients can detect conflicts."""
        with self._lock:
            if call_id not in self.records:
                raise KeyError(call_id)
            current = self.records[call_id]
            if expected_version is not None and expected_version != current.version:
                raise VersionConflict(
                    f"call {call_id} is at version {current.version}, client had {expected_version}"
                )
            timestamp = time.time()
            updated = self._apply_label(call_id, call_class, annotator, timestamp)
            self._append(
                {
                    "type": "label",
                    "call_id": call_id,
                    "class": CLASS_LABELS[call_class],
                    "annotator": annotator,
                    "timestamp": timestamp,
                }
            )
            return updated

    def compact(self) -> None:
        with self._lock:
            tmp = self.path.with_suffix(".tmp")
            with open(tmp, "w") as f:
                for record in self.records.values():
                    f.write(json.dumps({"type": "record", "record": record.to_dict()}) + "\n")
            tmp.replace(self.path)


class VersionConflict(RuntimeError):
    pass
