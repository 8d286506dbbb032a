import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from usvkit.estimators import FnnUsvClassifier
from usvkit.models import FnnArchConfig, save_classifier
from usvkit.pipeline import PipelineConfig
from usvkit.service import ServiceConfig, create_app
from usvkit.synth import SynthCorpusConfig, write_corpus


@pytest.fixture(scope="module")
def service_env(tmp_path_factory, small_labeled_snippets):
    root = tmp_path_factory.mktemp("service")
    data_dir = root / "data"
    write_corpus(SynthCorpusConfig.easy(seed=301, calls_per_recording=6), 2, data_dir)

    fnn_snips, _, labels = small_labeled_snippets
    est = FnnUsvClassifier(learning_rate=3e-4, epochs=25, seed=2)
    est.fit(fnn_snips, labels)
    model_path = root / "fnn.json"
    save_classifier(est.model_, model_path, FnnArchConfig(seed=2), est.train_config_, None, {"mean_time": 0.3})
    return root, data_dir, model_path


def _make_client(service_env, journal_name="journal.jsonl", threshold=0.999):
    root, data_dir, model_path = service_env
    config = ServiceConfig(
        data_dir=data_dir,
        journal_path=root / journal_name,
        model_path=model_path,
        pipeline=PipelineConfig(model_path=str(model_path), triage_threshold=threshold),
    )
    return TestClient(create_app(config))


@pytest.fixture(scope="module")
def client(service_env):
    # near-1 threshold guarantees a populated review queue
    return _make_client(service_env)


def test_list_recordings(client):
    response = client.get("/api/recordings")
    assert response.status_code == 200
    assert response.json() == ["rec_0000", "rec_0001"]


def test_spectrogram_tile_png_and_meta(client):
    response = client.get("/api/recordings/rec_0000/spectrogram", params={"t0": 0, "t1": 0.5})
    assert response.status_code == 200
    assert response.headers["content-type"] == "image/png"
    assert response.content[:8] == b"\x89PNG\r\n\x1a\n"
    meta = json.loads(response.headers["X-Spectrogram-Meta"])
    assert meta["n_freq"] == 129
    assert meta["dt_s"] == pytest.approx(1.024e-3)
    json_response = client.get(
        "/api/recordings/rec_0000/spectrogram", params={"t0": 0, "t1": 0.5, "format": "json"}
    )
    assert json_response.json()["n_time"] == meta["n_time"]


def test_spectrogram_unknown_recording(client):
    response = client.get("/api/recordings/nope/spectrogram")
    assert response.status_code == 404
    assert response.json()["code"] == "not_found"


def test_detect_endpoint_returns_events_and_traces(client):
    response = client.post("/api/detect", json={"recording_id": "rec_0000"})
    assert response.status_code == 200
    body = response.json()
    assert len(body["events"]) == 6
    assert len(body["features"]["entropy"]) == len(body["features"]["ratio"])
    assert body["features"]["max_entropy"] == pytest.approx(np.log(73))


def test_detect_with_stricter_params_monotone(client):
    base = client.post("/api/detect", json={"recording_id": "rec_0000"}).json()
    strict = client.post(
        "/api/detect",
        json={
            "recording_id": "rec_0000",
            "params": {"entropy_threshold": 1.0, "gap_fuse_steps": 0, "min_len_steps": 0},
        },
    ).json()

    def total(events):
        return sum(e["end_s"] - e["start_s"] for e in events)

    loose = client.post(
        "/api/detect",
        json={"recording_id": "rec_0000", "params": {"gap_fuse_steps": 0, "min_len_steps": 0}},
    ).json()
    assert total(strict["events"]) <= total(loose["events"])
    # identical params give identical events
    again = client.post("/api/detect", json={"recording_id": "rec_0000"}).json()
    assert again["events"] == base["events"]


def test_detect_rejects_bad_params(client):
    response = client.post(
        "/api/detect",
        json={"recording_id": "rec_0000", "params": {"entropy_thresh": 1.0}},
    )
    assert response.status_code == 400
    assert "unknown" in response.json()["message"]


def test_review_queue_sorted_ascending(client):
    response = client.get("/api/review", params={"status": "Flagged"})
    assert response.status_code == 200
    body = response.json()
    assert body["total"] == 12  # every call flagged at threshold 0.999
    confidences = [item["confidence"] for item in body["items"]]
    assert confidences == sorted(confidences)


def test_review_pagination(client):
    page0 = client.get("/api/review", params={"status": "Flagged", "page": 0, "page_size": 5}).json()
    page1 = client.get("/api/review", params={"status": "Flagged", "page": 1, "page_size": 5}).json()
    assert len(page0["items"]) == 5
    assert len(page1["items"]) == 5
    ids = lambda page: {f"{i['recording_id']}:{i['call_index']}" for i in page["items"]}  # noqa: E731
    assert ids(page0).isdisjoint(ids(page1))


def test_review_unknown_status(client):
    assert client.get("/api/review", params={"status": "Weird"}).status_code == 400


def test_label_flow_and_version_conflict(client):
    queue = client.get("/api/review", params={"status": "Flagged"}).json()
    call = queue["items"][0]
    call_id = f"{call['recording_id']}:{call['call_index']}"
    response = client.post(
        f"/api/calls/{call_id}/label",
        json={"call_class": "composite", "annotator": "ann", "version": call["version"]},
    )
    assert response.status_code == 200
    updated = response.json()
    assert updated["triage_status"] == "ManuallyLabeled"
    assert updated["manual_class"] == "composite"
    assert updated["version"] == call["version"] + 1

    conflict = client.post(
        f"/api/calls/{call_id}/label",
        json={"call_class": "flat", "annotator": "bob", "version": call["version"]},
    )
    assert conflict.status_code == 409
    assert conflict.json()["code"] == "conflict"

    # labeled call left the flagged queue, appears under ManuallyLabeled
    flagged = client.get("/api/review", params={"status": "Flagged"}).json()
    assert all(
        f"{item['recording_id']}:{item['call_index']}" != call_id for item in flagged["items"]
    )
    manual = client.get("/api/review", params={"status": "ManuallyLabeled"}).json()
    assert any(
        f"{item['recording_id']}:{item['call_index']}" == call_id for item in manual["items"]
    )


def test_label_validation(client):
    assert client.post("/api/calls/nope:0/label", json={"call_class": "flat", "annotator": "a"}).status_code == 404
    queue = client.get("/api/review", params={"status": "Flagged"}).json()
    call = queue["items"][0]
    call_id = f"{call['recording_id']}:{call['call_index']}"
    assert client.post(f"/api/calls/{call_id}/label", json={"call_class": "sparkle", "annotator": "a"}).status_code == 400


def test_labels_survive_restart(service_env):
    client1 = _make_client(service_env, journal_name="restart.jsonl")
    queue = client1.get("/api/review", params={"status": "Flagged"}).json()
    call = queue["items"][0]
    call_id = f"{call['recording_id']}:{call['call_index']}"
    client1.post(f"/api/calls/{call_id}/label", json={"call_class": "short", "annotator": "ann"})

    client2 = _make_client(service_env, journal_name="restart.jsonl")
    manual = client2.get("/api/review", params={"status": "ManuallyLabeled"}).json()
    ids = {f"{item['recording_id']}:{item['call_index']}" for item in manual["items"]}
    assert call_id in ids


def test_config_get_put(client):
    config = client.get("/api/config").json()
    assert config["triage_threshold"] == 0.999
    config["triage_threshold"] = 0.5
    updated = client.put("/api/config", json=config).json()
    assert updated["triage_threshold"] == 0.5
    assert client.get("/api/config").json()["triage_threshold"] == 0.5
