import numpy as np
import pytest
from fastapi.testclient import TestClient

from direct_al.harness import build_pool, holdout_split, parse_spec, run_experiment
from direct_al.service import create_app


def service_config(**overrides):
    cfg = {
        "pool": {"generator": {"num_classes": 2, "counts": [20, 40], "dim": 2,
                                "separation": 1.0, "seed": 0}},
        "strategy": "direct",
        "T": 2,
        "B_train": 8,
        "B_parallel": 3,
        "seed": 2,
        "scorer": {"epochs": 20},
    }
    cfg.update(overrides)
    return cfg


def train_oracle(cfg):
    """Observed labels of the session's training split, keyed by id."""
    spec = parse_spec(dict(cfg))
    split = holdout_split(build_pool(spec), spec.holdout_fraction, spec.seed)
    labels = split.train_pool.observed_labels
    return lambda example_id: int(labels[example_id])


def drive_to_done(client, session_id, labels_for, max_steps=500):
    for _ in range(max_steps):
        batch = client.get(f"/sessions/{session_id}/batch").json()
        if not batch["batch"]:
            assert batch["status"] == "done"
            return
        payload = {
            "labels": [{"id": item["id"], "label": labels_for(item["id"])}
                       for item in batch["batch"]],
            "annotator": "script",
        }
        response = client.post(f"/sessions/{session_id}/labels", json=payload)
        assert response.status_code == 200, response.text
    raise AssertionError("session did not finish")


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(str(tmp_path / "sessions")))


def test_create_session_initial_state(client):
    response = client.post("/sessions", json=service_config())
    assert response.status_code == 201
    body = response.json()
    state = body["state"]
    assert body["session_id"] == state["session_id"]
    assert state["status"] == "active"
    assert state["round"] == 0
    assert state["phase"] == "seed"
    assert state["pending_count"] == 3  # B_parallel
    assert state["labeled_total"] == 0
    assert state["target_total"] == 16
    assert state["strategy"] == "direct"


def test_create_rejects_invalid_config(client):
    response = client.post("/sessions", json=service_config(strategy="entropy"))
    assert response.status_code == 422
    assert response.json()["code"] == "invalid_config"


def test_create_idempotency_token(client):
    cfg = service_config(idempotency_token="tok-1")
    first = client.post("/sessions", json=cfg)
    assert first.status_code == 201
    again = client.post("/sessions", json=service_config(idempotency_token="tok-1"))
    assert again.status_code == 200
    assert again.json()["session_id"] == first.json()["session_id"]
    other = client.post("/sessions", json=service_config(idempotency_token="tok-2"))
    assert other.status_code == 201
    assert other.json()["session_id"] != first.json()["session_id"]


def test_create_rejects_non_string_token(client):
    response = client.post("/sessions", json=service_config(idempotency_token=7))
    assert response.status_code == 422
    assert response.json()["code"] == "invalid_token"


def test_batch_refetch_is_idempotent(client):
    session_id = client.post("/sessions", json=service_config()).json()["session_id"]
    a = client.get(f"/sessions/{session_id}/batch").json()
    b = client.get(f"/sessions/{session_id}/batch").json()
    assert [item["id"] for item in a["batch"]] == [item["id"] for item in b["batch"]]
    assert len(a["batch"]) == 3
    assert all("features" in item for item in a["batch"])


def test_submit_advances_state(client):
    cfg = service_config()
    session_id = client.post("/sessions", json=cfg).json()["session_id"]
    oracle = train_oracle(cfg)
    batch = client.get(f"/sessions/{session_id}/batch").json()["batch"]
    labels = [{"id": item["id"], "label": oracle(item["id"])} for item in batch]
    state = client.post(f"/sessions/{session_id}/labels",
                        json={"labels": labels, "annotator": "a"}).json()
    assert state["labeled_total"] == 3
    next_batch = client.get(f"/sessions/{session_id}/batch").json()["batch"]
    assert {item["id"] for item in next_batch}.isdisjoint({item["id"] for item in batch})


def test_submit_wrong_ids_is_rejected_and_harmless(client):
    session_id = client.post("/sessions", json=service_config()).json()["session_id"]
    before = client.get(f"/sessions/{session_id}/state").json()
    batch = client.get(f"/sessions/{session_id}/batch").json()["batch"]
    wrong = [{"id": 9999, "label": 1}] + [
        {"id": item["id"], "label": 1} for item in batch[1:]
    ]
    response = client.post(f"/sessions/{session_id}/labels",
                           json={"labels": wrong, "annotator": "a"})
    assert response.status_code == 409
    assert response.json()["code"] == "batch_mismatch"
    assert client.get(f"/sessions/{session_id}/state").json() == before


def test_submit_partial_batch_rejected(client):
    session_id = client.post("/sessions", json=service_config()).json()["session_id"]
    batch = client.get(f"/sessions/{session_id}/batch").json()["batch"]
    partial = [{"id": batch[0]["id"], "label": 1}]
    response = client.post(f"/sessions/{session_id}/labels",
                           json={"labels": partial, "annotator": "a"})
    assert response.status_code == 409
    assert response.json()["code"] == "batch_mismatch"


def test_submit_label_out_of_range(client):
    session_id = client.post("/sessions", json=service_config()).json()["session_id"]
    batch = client.get(f"/sessions/{session_id}/batch").json()["batch"]
    bad = [{"id": item["id"], "label": 3} for item in batch]
    response = client.post(f"/sessions/{session_id}/labels",
                           json={"labels": bad, "annotator": "a"})
    assert response.status_code == 422
    assert response.json()["code"] == "label_out_of_range"


def test_submit_duplicate_id(client):
    session_id = client.post("/sessions", json=service_config()).json()["session_id"]
    batch = client.get(f"/sessions/{session_id}/batch").json()["batch"]
    dup = [{"id": batch[0]["id"], "label": 1} for _ in batch]
    response = client.post(f"/sessions/{session_id}/labels",
                           json={"labels": dup, "annotator": "a"})
    assert response.status_code == 422
    assert response.json()["code"] == "duplicate_id"


def test_submit_malformed_labels(client):
    session_id = client.post("/sessions", json=service_config()).json()["session_id"]
    for payload in ({"labels": [], "annotator": "a"},
                    {"labels": [{"id": 0}], "annotator": "a"},
                    {"labels": "nope", "annotator": "a"},
                    {"annotator": "a"}):
        response = client.post(f"/sessions/{session_id}/labels", json=payload)
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_labels"
    response = client.post(f"/sessions/{session_id}/labels",
                           json={"labels": [{"id": 0, "label": 1}], "annotator": 5})
    assert response.status_code == 422
    assert response.json()["code"] == "invalid_labels"


def test_unknown_session_404(client):
    response = client.get("/sessions/deadbeef/state")
    assert response.status_code == 404
    assert response.json()["code"] == "session_not_found"


def test_full_session_matches_simulator(client):
    cfg = service_config()
    session_id = client.post("/sessions", json=cfg).json()["session_id"]
    drive_to_done(client, session_id, train_oracle(cfg))

    state = client.get(f"/sessions/{session_id}/state").json()
    assert state["status"] == "done"
    assert state["labeled_total"] == 16

    log_response = client.get(f"/sessions/{session_id}/log")
    assert log_response.status_code == 200
    assert log_response.headers["content-type"].startswith("text/csv")
    assert log_response.text.startswith("# direct_al_log_v1\n")

    spec = parse_spec(dict(cfg))
    expected = run_experiment(build_pool(spec), spec).to_csv()
    assert log_response.text == expected


def test_terminal_session_refuses_labels(client):
    cfg = service_config(T=1)
    session_id = client.post("/sessions", json=cfg).json()["session_id"]
    drive_to_done(client, session_id, train_oracle(cfg))
    batch = client.get(f"/sessions/{session_id}/batch").json()
    assert batch["status"] == "done"
    assert batch["batch"] == []
    response = client.post(f"/sessions/{session_id}/labels",
                           json={"labels": [{"id": 0, "label": 1}], "annotator": "a"})
    assert response.status_code == 409
    assert response.json()["code"] == "no_pending_batch"


def test_restart_resumes_mid_session(tmp_path):
    data_dir = str(tmp_path / "sessions")
    cfg = service_config()
    oracle = train_oracle(cfg)

    first = TestClient(create_app(data_dir))
    session_id = first.post("/sessions", json=cfg).json()["session_id"]
    for _ in range(3):
        batch = first.get(f"/sessions/{session_id}/batch").json()["batch"]
        labels = [{"id": item["id"], "label": oracle(item["id"])} for item in batch]
        first.post(f"/sessions/{session_id}/labels",
                   json={"labels": labels, "annotator": "a"})
    expected_next = [item["id"]
                     for item in first.get(f"/sessions/{session_id}/batch").json()["batch"]]
    expected_state = first.get(f"/sessions/{session_id}/state").json()

    # Fresh process over the same data directory replays the journal.
    second = TestClient(create_app(data_dir))
    resumed = second.get(f"/sessions/{session_id}/batch").json()
    assert [item["id"] for item in resumed["batch"]] == expected_next
    assert second.get(f"/sessions/{session_id}/state").json() == expected_state

    drive_to_done(second, session_id, oracle)
    spec = parse_spec(dict(cfg))
    expected_log = run_experiment(build_pool(spec), spec).to_csv()
    assert second.get(f"/sessions/{session_id}/log").text == expected_log


def test_restart_preserves_idempotency_tokens(tmp_path):
    data_dir = str(tmp_path / "sessions")
    first = TestClient(create_app(data_dir))
    session_id = first.post(
        "/sessions", json=service_config(idempotency_token="tok")
    ).json()["session_id"]
    second = TestClient(create_app(data_dir))
    replay = second.post("/sessions", json=service_config(idempotency_token="tok"))
    assert replay.status_code == 200
    assert replay.json()["session_id"] == session_id


def test_session_with_noise_still_deterministic(tmp_path):
    """Noise is reapplied from the stored clean pool on every reload."""
    data_dir = str(tmp_path / "sessions")
    cfg = service_config(eta=0.3, strategy="random")
    client_a = TestClient(create_app(data_dir))
    session_id = client_a.post("/sessions", json=cfg).json()["session_id"]
    drive_to_done(client_a, session_id, train_oracle(cfg))
    log_a = client_a.get(f"/sessions/{session_id}/log").text

    spec = parse_spec(dict(cfg))
    expected = run_experiment(build_pool(spec), spec).to_csv()
    assert log_a == expected
