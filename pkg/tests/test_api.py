import json
import shutil

import pytest
from fastapi.testclient import TestClient

from iotsam.api import create_app
from iotsam.documents import parse_document, serialize_document
from iotsam.filtering import filter_catalog
from iotsam.store import CampaignStore

from .conftest import FIXTURES


@pytest.fixture(autouse=True)
def fast_credential_throttle(monkeypatch):
    monkeypatch.setattr("iotsam.probes.CREDENTIAL_THROTTLE_SECONDS", 0.02)


@pytest.fixture
def store(tmp_path) -> CampaignStore:
    store = CampaignStore(tmp_path / "store")
    schemes = store.root / "schemes"
    schemes.mkdir()
    shutil.copy(FIXTURES / "lab.scheme.json", schemes / "lab.scheme.json")
    return store


@pytest.fixture
def client(store) -> TestClient:
    app = create_app(store)
    return TestClient(app, raise_server_exceptions=False)


@pytest.fixture
def campaign_docs(live_lock_model, lab_profile, mini_catalog):
    plan = filter_catalog(mini_catalog, live_lock_model, lab_profile)
    return {
        "device": serialize_document(live_lock_model),
        "profile": serialize_document(lab_profile),
        "catalog": serialize_document(mini_catalog),
        "plan": serialize_document(plan),
    }


def create_session(client, campaign_docs) -> str:
    response = client.post("/api/v1/sessions", files={
        name: (f"{name}.json", data, "application/json")
        for name, data in campaign_docs.items()
    })
    assert response.status_code == 201, response.text
    return response.json()["session-id"]


def sse_events(response) -> list[tuple[str, dict]]:
    events = []
    event_name = None
    for line in response.iter_lines():
        if line.startswith("event: "):
            event_name = line[len("event: "):]
        elif line.startswith("data: "):
            events.append((event_name, json.loads(line[len("data: "):])))
    return events


def run_automated(client, session_id) -> list[tuple[str, dict]]:
    with client.stream("POST", f"/api/v1/sessions/{session_id}/execute-automated") as r:
        assert r.status_code == 200
        return sse_events(r)


def submit_manual(client, session_id, entry, outcome="PASS", rationale="checked",
                  observations=None):
    payload = {
        "plan-entry-id": entry["plan-entry-id"],
        "assessor-id": "api-tester",
        "step-observations": observations if observations is not None
        else [["ok"] for _ in entry["instantiated-guide"]],
        "outcome": outcome,
        "rationale": rationale,
    }
    return client.post(f"/api/v1/sessions/{session_id}/manual-results", json=payload)


def test_create_and_list_sessions(client, campaign_docs):
    assert client.get("/api/v1/sessions").json() == {"sessions": []}
    session_id = create_session(client, campaign_docs)
    listing = client.get("/api/v1/sessions").json()["sessions"]
    assert [s["session-id"] for s in listing] == [session_id]
    assert listing[0]["state"] == "PLANNED"
    assert listing[0]["entries"] == 9


def test_create_session_rejects_invalid_document(client, campaign_docs):
    docs = dict(campaign_docs)
    docs["device"] = b"{not json"
    response = client.post("/api/v1/sessions", files={
        name: (f"{name}.json", data, "application/json")
        for name, data in docs.items()
    })
    assert response.status_code == 400
    body = response.json()
    assert body["code"] == "SYNTAX"
    assert body["status"] == 400


def test_unknown_session_is_404(client):
    response = client.get("/api/v1/sessions/0001-missing")
    assert response.status_code == 404
    assert response.json()["code"] == "NOT_FOUND"


def test_plan_bytes_identical_to_canonical_serialization(client, store, campaign_docs):
    session_id = create_session(client, campaign_docs)
    response = client.get(f"/api/v1/sessions/{session_id}/plan")
    assert response.status_code == 200
    stored = store.load_session(session_id)
    assert response.content == serialize_document(stored.plan)


def test_execute_automated_streams_protocols_in_plan_order(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    events = run_automated(client, session_id)
    names = [name for name, _ in events]
    assert names[-1] == "done"
    protocol_events = [data for name, data in events if name == "protocol"]
    assert len(protocol_events) == 5
    assert [p["plan-entry-id"] for p in protocol_events] == [
        "TC-NET-001@nw-telnet", "TC-NET-004@nw-telnet", "TC-NET-003@nw-https",
        "TC-NET-002@nw-https", "TC-NET-005@nw-telnet",
    ]
    done = events[-1][1]
    assert done["executed"] == 5
    assert done["pending-manual"] == 4
    assert done["state"] == "AWAITING_MANUAL"


def test_pending_manual_after_execution(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    run_automated(client, session_id)
    pending = client.get(f"/api/v1/sessions/{session_id}/pending-manual").json()["pending"]
    assert [p["plan-entry-id"] for p in pending] == [
        "TC-NET-006@nw-telnet", "TC-PHY-008@mcu", "TC-PHY-009@mcu",
        "TC-RF-007@wl-wifi",
    ]
    assert all(p["instantiated-guide"] for p in pending)
    assert pending[0]["case-title"]


def test_manual_result_validation_errors(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    run_automated(client, session_id)
    pending = client.get(f"/api/v1/sessions/{session_id}/pending-manual").json()["pending"]
    entry = pending[0]

    short = submit_manual(client, session_id, entry, observations=[["x"]])
    assert short.status_code == 400
    assert short.json()["code"] == "STEP_COUNT_MISMATCH"

    reserved = submit_manual(client, session_id, entry, outcome="ERROR")
    assert reserved.status_code == 400
    assert reserved.json()["code"] == "INVALID_OUTCOME"

    ghost = dict(entry)
    ghost["plan-entry-id"] = "TC-GHOST@nope"
    assert submit_manual(client, session_id, ghost).status_code == 404


def test_duplicate_manual_submission_conflicts(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    run_automated(client, session_id)
    pending = client.get(f"/api/v1/sessions/{session_id}/pending-manual").json()["pending"]
    entry = pending[0]
    first = submit_manual(client, session_id, entry)
    assert first.status_code == 201
    protocol = parse_document(first.content, "execution-protocol")
    assert protocol.executor_identity == "manual"
    assert protocol.executor_version == "api-tester"

    second = submit_manual(client, session_id, entry)
    assert second.status_code == 409
    assert second.json()["code"] == "DUPLICATE_ENTRY"


def test_assess_before_completion_conflicts(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    run_automated(client, session_id)
    response = client.post(
        f"/api/v1/sessions/{session_id}/assess", params={"scheme-id": "lab-default"}
    )
    assert response.status_code == 409
    assert response.json()["code"] == "WRONG_STATE"


def complete_campaign(client, session_id):
    run_automated(client, session_id)
    pending = client.get(f"/api/v1/sessions/{session_id}/pending-manual").json()["pending"]
    for entry in pending:
        assert submit_manual(client, session_id, entry).status_code == 201


def test_assess_and_reports(client, store, campaign_docs):
    session_id = create_session(client, campaign_docs)
    complete_campaign(client, session_id)
    response = client.post(
        f"/api/v1/sessions/{session_id}/assess", params={"scheme-id": "lab-default"}
    )
    assert response.status_code == 200
    report = parse_document(response.content, "assessment-report")
    assert report.result == "INSECURE"

    machine = client.get(f"/api/v1/sessions/{session_id}/report",
                         params={"format": "machine"})
    stored = store.load_session(session_id)
    assert machine.content == serialize_document(stored.report)

    text = client.get(f"/api/v1/sessions/{session_id}/report",
                      params={"format": "text"})
    assert text.status_code == 200
    assert "Result: INSECURE" in text.text

    again = client.post(
        f"/api/v1/sessions/{session_id}/assess", params={"scheme-id": "lab-default"}
    )
    assert again.status_code == 409


def test_assess_with_unknown_scheme_is_404(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    complete_campaign(client, session_id)
    response = client.post(
        f"/api/v1/sessions/{session_id}/assess", params={"scheme-id": "no-such"}
    )
    assert response.status_code == 404


def test_report_before_assessment_conflicts(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    response = client.get(f"/api/v1/sessions/{session_id}/report")
    assert response.status_code == 409
    assert response.json()["code"] == "WRONG_STATE"


def test_session_summary_tracks_progress(client, campaign_docs):
    session_id = create_session(client, campaign_docs)
    summary = client.get(f"/api/v1/sessions/{session_id}").json()
    assert summary["state"] == "PLANNED"
    assert summary["covered"] == 0
    complete_campaign(client, session_id)
    summary = client.get(f"/api/v1/sessions/{session_id}").json()
    assert summary["covered"] == 9
    assert summary["all-covered"] is True
    assert summary["result"] is None
