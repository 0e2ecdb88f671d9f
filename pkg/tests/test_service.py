import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from semglab import recording as rec
from semglab.service import ServiceConfig, SessionManager, create_app


@pytest.fixture()
def client(tmp_path):
    config = ServiceConfig(data_dir=tmp_path, rate_multiplier=200.0, train_blocks=2)
    manager = SessionManager(config)
    app = create_app(manager=manager)
    with TestClient(app) as c:
        c.manager = manager
        yield c


def wait_idle(client, timeout=60.0):
    t0 = time.monotonic()
    while time.monotonic() - t0 < timeout:
        status = client.get("/api/status").json()
        if status["phase"] == "idle":
            return status
        time.sleep(0.05)
    raise TimeoutError("service did not return to idle")


def test_status_idempotent(client):
    s1 = client.get("/api/status").json()
    s2 = client.get("/api/status").json()
    assert s1["phase"] == s2["phase"] == "idle"
    assert s1["params"] == s2["params"]


def test_set_params_echoed(client):
    r = client.post("/api/params", json={"window_ms": 500, "step_ms": 250, "model": "lda"})
    assert r.status_code == 200
    status = client.get("/api/status").json()
    assert status["params"] == {"window_ms": 500.0, "step_ms": 250.0, "model": "lda"}


def test_recording_session_writes_expected_rows(client, tmp_path):
    r = client.post("/api/session/start",
                    json={"subject_id": 2, "day_id": 1, "n_blocks": 1, "n_trials": 2})
    assert r.status_code == 200 and r.json()["phase"] == "recording"
    status = wait_idle(client)
    assert status["last_saved"]["rows"] == 2 * 10 * 500
    saved = rec.read_recording(tmp_path / "S02" / "D1" / "session.dat")
    assert saved.data.shape == (10000, 15)
    assert saved.meta["subject_id"] == 2
    trials, _ = rec.extract_trials(saved)
    assert [t.trial_id for t in trials] == [1, 2]


def test_conflicting_transitions_rejected(client):
    client.post("/api/session/start", json={"subject_id": 1, "day_id": 1, "n_blocks": 1, "n_trials": 2})
    r = client.post("/api/online/start", json={})
    assert r.status_code == 409
    body = r.json()
    assert body["phase"] == "recording" and "online" in body["error"]
    r = client.post("/api/params", json={"window_ms": 500})
    assert r.status_code == 409
    r = client.post("/api/session/start", json={"subject_id": 1, "day_id": 1})
    assert r.status_code == 409
    wait_idle(client)


def test_stop_session_is_legal_from_any_phase(client):
    assert client.post("/api/session/stop").json()["phase"] == "idle"
    client.post("/api/session/start", json={"subject_id": 1, "day_id": 1, "n_blocks": 12})
    time.sleep(0.2)
    status = client.post("/api/session/stop").json()
    assert status["phase"] == "idle"
    assert 0 < status["last_saved"]["rows"] < 12 * 12 * 10 * 500  # partial write


def test_stream_prompts_progress_and_decimation(client):
    sid, sub = client.manager.hub.subscribe(display_capacity=100_000)
    try:
        client.post("/api/session/start",
                    json={"subject_id": 1, "day_id": 1, "n_blocks": 1, "n_trials": 12})
        wait_idle(client)
        msgs = []
        while True:
            m = sub.get(timeout=0.2)
            if m is None:
                break
            msgs.append(m)
    finally:
        client.manager.hub.unsubscribe(sid)

    prompts = [m for m in msgs if m["type"] == "prompt"]
    assert [p["mode_id"] for p in prompts] == list(range(1, 13))  # block 1: modes 1..12
    progress = [m for m in msgs if m["type"] == "progress"]
    per_trial = {}
    for p in progress:
        per_trial.setdefault(p["trial"], []).append(p["value"])
    assert set(per_trial) == set(range(1, 13))
    for trial, values in per_trial.items():
        assert values == sorted(values)  # monotone within a trial
        assert values[-1] == 1.0  # exactly 1.0 at trial end
    signals = [m for m in msgs if m["type"] == "signal"]
    # 120 s at 500 Hz, decimated by 10 -> ~500 display frames per 10 s trial
    assert 5990 <= len(signals) <= 6000
    assert len(signals[0]["emg"]) == 8 and len(signals[0]["accel"]) == 3
    saved = [m for m in msgs if m["type"] == "event" and m["name"] == "recording_saved"]
    assert len(saved) == 1 and saved[0]["rows"] == 60000


def test_websocket_stream_delivers_messages(client):
    with client.websocket_connect("/ws/stream") as ws:
        client.post("/api/session/start",
                    json={"subject_id": 1, "day_id": 1, "n_blocks": 1, "n_trials": 1})
        types = set()
        for _ in range(50):
            msg = ws.receive_json()
            types.add(msg["type"])
            if msg["type"] == "event" and msg.get("name") == "recording_saved":
                break
        assert "prompt" in types and "progress" in types
    wait_idle(client)


def test_online_flow_reports_results(client):
    client.post("/api/params", json={"window_ms": 250, "step_ms": 250, "model": "lda"})
    sid, sub = client.manager.hub.subscribe(display_capacity=100_000)
    try:
        r = client.post("/api/online/start", json={"n_trials": 3, "seed": 5})
        assert r.status_code == 200 and r.json()["phase"] == "online_test"
        status = wait_idle(client)
        summary = status["online_summary"]
        assert summary["n_trials"] == 3 and summary["completed"] == 3
        assert summary["accuracy"] >= 0.5
        assert summary["mean_delta_t_ms"] is not None
        msgs = []
        while True:
            m = sub.get(timeout=0.2)
            if m is None:
                break
            msgs.append(m)
    finally:
        client.manager.hub.unsubscribe(sid)
    results = [m for m in msgs if m["type"] == "trial_result"]
    assert len(results) == 3
    for t in results:
        assert t["delta_t_ms"] is not None and t["correct"] in (True, False)
    assert any(m["type"] == "prediction" for m in msgs)
    prompts = [m for m in msgs if m["type"] == "prompt"]
    assert len(prompts) == 3 and all(p["mode_id"] != 1 for p in prompts)


def test_reaction_calibration_flow(client):
    r = client.post("/api/reaction/start", json={"n": 10})
    assert r.status_code == 200
    r = client.post("/api/reaction/submit", json={"latencies_s": [0.35] * 5 + [0.45] * 5})
    assert r.status_code == 200
    assert r.json()["reaction_const_s"] == pytest.approx(0.40)


def test_slow_display_client_drops_are_reported(client):
    sid, sub = client.manager.hub.subscribe(display_capacity=8)
    try:
        client.post("/api/session/start",
                    json={"subject_id": 1, "day_id": 1, "n_blocks": 1, "n_trials": 2})
        wait_idle(client)
        msgs = []
        while True:
            m = sub.get(timeout=0.2)
            if m is None:
                break
            msgs.append(m)
    finally:
        client.manager.hub.unsubscribe(sid)
    # Control plane is complete despite display drops.
    prompts = [m for m in msgs if m["type"] == "prompt"]
    progress = [m for m in msgs if m["type"] == "progress"]
    assert [p["mode_id"] for p in prompts] == [1, 2]
    assert sum(1 for p in progress if p["value"] == 1.0) == 2
    dropped = [m for m in msgs if m["type"] == "signal" and "display_drops" in m]
    assert dropped and dropped[-1]["display_drops"] > 0
