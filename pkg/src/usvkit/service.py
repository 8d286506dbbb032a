"""HTTP/JSON service for the review UI: spectrogram tiles, live detection
with feature traces, the flagged-call review queue and label persistence."""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .audio_io import CANONICAL_RATE_HZ, Recording, load_wav
from .calls import LABEL_TO_CLASS, CallClass
from .detection import DetectionParams, compute_features, fuse_and_filter, indicator
from .pipeline import (
    Journal,
    LoadedClassifier,
    PipelineConfig,
    TriageStatus,
    VersionConflict,
    run_pipeline,
)
from .preprocess import downsample_mean
from .spectrogram import DETECTION_STFT, stft_energy, to_db

logger = logging.getLogger(__name__)

MAX_TILE_COLUMNS = 2000
TILE_DB_RANGE = 80.0


@dataclass
class ServiceConfig:
    data_dir: Path
    journal_path: Path
    model_path: Path | None = None
    pipeline: PipelineConfig = None  # type: ignore[assignment]
    analyze_on_start: bool = True

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        self.journal_path = Path(self.journal_path)
        if self.pipeline is None:
            self.pipeline = PipelineConfig(
                model_path=str(self.model_path) if self.model_path else None
            )


class DetectRequest(BaseModel):
    recording_id: str
    params: dict | None = None


class LabelRequest(BaseModel):
    call_class: str | int
    annotator: str
    version: int | None = None

    model_config = {"populate_by_name": True}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status, self.code, self.message = status, code, message


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.journal = Journal(config.journal_path)
        self.pipeline_config = config.pipeline
        self._recordings: dict[str, Recording] = {}
        self.classifier = (
            LoadedClassifier.from_file(config.model_path) if config.model_path else None
        )
        self._config_file = config.journal_path.with_suffix(".config.json")
        if self._config_file.exists():
            self.pipeline_config = PipelineConfig.from_dict(
                json.loads(self._config_file.read_text())
            )

    def recording_ids(self) -> list[str]:
        return sorted(p.stem for p in self.config.data_dir.glob("*.wav"))

    def recording(self, rec_id: str) -> Recording:
        if rec_id not in self._recordings:
            path = self.config.data_dir / f"{rec_id}.wav"
            if not path.exists():
                raise ApiError(404, "not_found", f"recording {rec_id} not found")
            rec = load_wav(path)
            if rec.sample_rate_hz != CANONICAL_RATE_HZ:
                logger.warning(
                    "%s: sample rate %d Hz differs from the canonical %d Hz the "
                    "default band edges were tuned for",
                    rec_id,
                    rec.sample_rate_hz,
                    CANONICAL_RATE_HZ,
                )
            self._recordings[rec_id] = rec
        return self._recordings[rec_id]

    def persist_config(self) -> None:
        self._config_file.write_text(json.dumps(self.pipeline_config.to_dict()))

    def analyze_missing(self) -> None:
        """Run the pipeline for recordings without journal records."""
        if self.classifier is None:
            return
        known = {r.recording_id for r in self.journal.records.values()}
        todo = [rid for rid in self.recording_ids() if rid not in known]
        if not todo:
            return
        recordings = [self.recording(rid) for rid in todo]
        records, errors = run_pipeline(recordings, self.pipeline_config, self.classifier)
        self.journal.add_records(records)
        for rid, message in errors.items():
            logger.error("analysis failed for %s: %s", rid, message)


def _tile_png(recording: Recording, t0: float, t1: float) -> tuple[bytes, dict]:
    from PIL import Image

    rate = recording.sample_rate_hz
    i0 = max(0, int(t0 * rate))
    i1 = min(recording.samples.size, int(t1 * rate))
    if i1 - i0 < DETECTION_STFT.segment_length:
        raise ApiError(400, "empty_window", "window too short for one spectrogram column")
    view = Recording(recording.id, recording.samples[i0:i1], rate)
    grid = to_db(stft_energy(view, DETECTION_STFT), TILE_DB_RANGE)
    values = grid.values.T  # rows = frequency
    if values.shape[1] > MAX_TILE_COLUMNS:
        values = downsample_mean(values, values.shape[0], MAX_TILE_COLUMNS)
    lo, hi = float(values.min()), float(values.max())
    scaled = np.zeros_like(values) if hi == lo else (values - lo) / (hi - lo)
    img = (scaled * 255).astype(np.uint8)[::-1]  # low frequencies at the bottom
    buf = io.BytesIO()
    Image.fromarray(img, mode="L").save(buf, format="PNG")
    meta = {
        "recording_id": recording.id,
        "t0_s": i0 / rate,
        "t1_s": i1 / rate,
        "dt_s": grid.dt_s,
        "df_hz": grid.df_hz,
        "f0_hz": grid.f0_hz,
        "n_time": values.shape[1],
        "n_freq": values.shape[0],
        "db_min": lo,
        "db_max": hi,
    }
    return buf.getvalue(), meta


def create_app(config: ServiceConfig) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="usvkit review service")
    app.state.usv = state

    if config.analyze_on_start:
        state.analyze_missing()

    @app.exception_handler(ApiError)
    async def handle_api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(ValueError)
    async def handle_value_error(_req: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"code": "invalid", "message": str(exc)})

    @app.get("/api/recordings")
    def recordings() -> list[str]:
        return state.recording_ids()

    @app.get("/api/recordings/{rec_id}/spectrogram")
    def spectrogram(
        rec_id: str,
        t0: float = Query(0.0),
        t1: float = Query(1e9),
        format: str = Query("png"),
    ):
        recording = state.recording(rec_id)
        t1 = min(t1, recording.duration_s)
        t0 = max(0.0, min(t0, t1))
        png, meta = _tile_png(recording, t0, t1)
        if format == "json":
            return JSONResponse(meta)
        return Response(
            content=png,
            media_type="image/png",
            headers={"X-Spectrogram-Meta": json.dumps(meta)},
        )

    @app.post("/api/detect")
    def detect(body: DetectRequest):
        recording = state.recording(body.recording_id)
        if body.params is not None:
            params = DetectionParams.from_json(json.dumps(body.params))
        else:
            params = state.pipeline_config.detection
        grid = stft_energy(recording, DETECTION_STFT)
        features = compute_features(grid, params)
        steps = fuse_and_filter(indicator(features, params), params)
        return {
            "recording_id": body.recording_id,
            "params": json.loads(params.to_json()),
            "events": [
                {"start_s": s * grid.dt_s, "end_s": e * grid.dt_s} for s, e in steps
            ],
            "features": {
                "dt_s": features.dt_s,
                "entropy": features.entropy.tolist(),
                "ratio": features.ratio.tolist(),
                "max_entropy": float(np.log(features.n_band_bins)),
            },
        }

    @app.get("/api/review")
    def review(
        status: str = Query("Flagged"),
        page: int = Query(0, ge=0),
        page_size: int = Query(50, ge=1, le=500),
    ):
        try:
            wanted = TriageStatus(status)
        except ValueError:
            raise ApiError(400, "invalid", f"unknown status {status!r}") from None
        items = [r for r in state.journal.records.values() if r.triage_status is wanted]
        items.sort(key=lambda r: (r.confidence if r.confidence is not None else 2.0, r.call_id))
        start = page * page_size
        return {
            "total": len(items),
            "page": page,
            "page_size": page_size,
            "items": [r.to_dict() for r in items[start : start + page_size]],
        }

    @app.post("/api/calls/{call_id}/label")
    def label(call_id: str, body: LabelRequest):
        try:
            call_class = (
                CallClass(body.call_class)
                if isinstance(body.call_class, int)
                else LABEL_TO_CLASS[body.call_class]
            )
        except (ValueError, KeyError):
            raise ApiError(400, "invalid", f"unknown class {body.call_class!r}") from None
        try:
            record = state.journal.label(call_id, call_class, body.annotator, body.version)
        except KeyError:
            raise ApiError(404, "not_found", f"call {call_id} not found") from None
        except VersionConflict as exc:
            raise ApiError(409, "conflict", str(exc)) from None
        return record.to_dict()

    @app.get("/api/config")
    def get_config():
        return state.pipeline_config.to_dict()

    @app.put("/api/config")
    def put_config(body: dict):
        state.pipeline_config = PipelineConfig.from_dict(body)
        state.persist_config()
        return state.pipeline_config.to_dict()

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.exists():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port)
