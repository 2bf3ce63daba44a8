"""Local HTTP service for driving live semi-automated campaigns.

Versioned under ``/api/v1``. Document responses are byte-identical to the
canonical serialization the CLI produces. Progress of automated execution is
streamed as server-sent events, one event per completed protocol, in
canonical plan order. Intended as a localhost single-assessor tool: no
authentication, bind explicitly to expose it.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .assessment import aggregate, derive_case_verdict, render_report, render_text_from_report
from .documents import DocumentError, parse_document, serialize_document
from .execution import (
    HarnessError,
    Observation,
    Outcome,
    execute_plan,
    record_manual_result,
)
from .filtering import TestPlan
from .model import AssessmentScheme, ExecutionMode
from .probes import bundled_registry
from .store import (
    CampaignStore,
    DuplicateEntryError,
    NotFoundError,
    Session,
    StoreError,
    WrongStateError,
)

API_PREFIX = "/api/v1"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "code": code, "message": message},
    )


def _status_for(exc: Exception) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, (WrongStateError, DuplicateEntryError)):
        return 409
    if isinstance(exc, (DocumentError, HarnessError, StoreError, ValueError)):
        return 400
    return 500


def _session_summary(session: Session) -> dict:
    return {
        "session-id": session.session_id,
        "state": session.state.value,
        "device-id": session.device.device_id,
        "device-name": session.device.display_name,
        "profile-id": session.profile.profile_id,
        "catalog-id": session.catalog.catalog_id,
        "plan-id": session.plan.plan_id,
        "entries": len(session.plan.entries),
        "covered": len(session.covered_entry_ids),
        "pending-manual": len(session.pending_manual_entries),
        "all-covered": session.all_covered,
        "result": session.report.result if session.report is not None else None,
    }


def _pending_entry_view(session: Session, entry) -> dict:
    case = session.catalog.case(entry.case_id)
    return {
        "plan-entry-id": entry.plan_entry_id,
        "case-id": entry.case_id,
        "case-title": case.title,
        "severity": case.severity.value,
        "execution-mode": entry.execution_mode.value,
        "target-component-id": entry.target_component_id,
        "instantiated-guide": list(entry.instantiated_guide),
    }


def _document_response(value, status: int = 200) -> Response:
    return Response(
        content=serialize_document(value),
        status_code=status,
        media_type="application/json",
    )


def _sse(event: str, payload: dict) -> str:
    return f"event: {event}\ndata: {json.dumps(payload, separators=(',', ':'))}\n\n"


def _load_scheme(schemes_dir: Path, scheme_id: str) -> AssessmentScheme:
    candidates = sorted(schemes_dir.glob("*.scheme.json")) if schemes_dir.is_dir() else []
    for path in candidates:
        try:
            scheme = parse_document(path.read_bytes(), "assessment-scheme")
        except DocumentError:
            continue
        if scheme.scheme_id == scheme_id:
            return scheme
    raise NotFoundError(
        f"no assessment scheme {scheme_id!r} under {schemes_dir}"
    )


def create_app(store: CampaignStore, *, schemes_dir: str | Path | None = None,
               assets_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="iotsam", docs_url=None, redoc_url=None)
    schemes_path = Path(schemes_dir) if schemes_dir else store.root / "schemes"
    executions_guard = threading.Lock()
    active_executions: set[str] = set()

    @app.exception_handler(Exception)
    async def handle_exception(request: Request, exc: Exception) -> JSONResponse:
        status = _status_for(exc)
        if status == 500:
            correlation = uuid.uuid4().hex[:12]
            return _error_response(
                500, "INTERNAL", f"internal error (correlation id {correlation})"
            )
        code = getattr(exc, "code", "BAD_REQUEST")
        return _error_response(status, code, str(exc))

    @app.get(API_PREFIX + "/sessions")
    def list_sessions() -> JSONResponse:
        summaries = [
            _session_summary(store.load_session(session_id))
            for session_id in store.list_sessions()
        ]
        return JSONResponse({"sessions": summaries})

    @app.post(API_PREFIX + "/sessions", status_code=201)
    async def create_session(device: UploadFile, profile: UploadFile,
                             catalog: UploadFile, plan: UploadFile) -> JSONResponse:
        device_doc = parse_document(await device.read(), "device-model")
        profile_doc = parse_document(await profile.read(), "testing-profile")
        catalog_doc = parse_document(await catalog.read(), "test-catalog")
        plan_doc = parse_document(await plan.read(), "test-plan")
        session_id = store.create_session(device_doc, profile_doc, catalog_doc, plan_doc)
        return JSONResponse({"session-id": session_id}, status_code=201)

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session(session_id: str) -> JSONResponse:
        return JSONResponse(_session_summary(store.load_session(session_id)))

    @app.get(API_PREFIX + "/sessions/{session_id}/plan")
    def get_plan(session_id: str) -> Response:
        return _document_response(store.load_session(session_id).plan)

    @app.get(API_PREFIX + "/sessions/{session_id}/protocols")
    def get_protocols(session_id: str) -> JSONResponse:
        """Recorded protocols in canonical plan order; lets clients resync."""
        session = store.load_session(session_id)
        order = {e.plan_entry_id: i for i, e in enumerate(session.plan.entries)}
        protocols = sorted(session.protocols, key=lambda p: order[p.plan_entry_id])
        return JSONResponse({
            "protocols": [json.loads(serialize_document(p)) for p in protocols],
        })

    @app.post(API_PREFIX + "/sessions/{session_id}/execute-automated")
    def execute_automated_entries(session_id: str) -> StreamingResponse:
        session = store.load_session(session_id)
        if session.report is not None:
            raise WrongStateError(f"session {session_id} is already ASSESSED")
        with executions_guard:
            if session_id in active_executions:
                raise WrongStateError(
                    f"an execution is already running for session {session_id}"
                )
            active_executions.add(session_id)

        pending_automated = [
            e for e in session.pending_entries
            if e.execution_mode is ExecutionMode.AUTOMATED
        ]
        run_plan = TestPlan(
            plan_id=session.plan.plan_id,
            device_id=session.plan.device_id,
            profile_id=session.plan.profile_id,
            catalog_id=session.plan.catalog_id,
            catalog_version=session.plan.catalog_version,
            created_at=session.plan.created_at,
            entries=tuple(pending_automated),
        )

        def event_stream():
            results: queue.Queue = queue.Queue()

            def sink(protocol) -> None:
                store.append_protocol(session_id, protocol)
                results.put(protocol)

            def runner() -> None:
                try:
                    execute_plan(run_plan, bundled_registry(), session_sink=sink,
                                 parallelism_limit=4)
                    results.put(None)
                except BaseException as exc:  # surfaced as an SSE error event
                    results.put(exc)

            worker = threading.Thread(target=runner, daemon=True)
            worker.start()
            executed = 0
            try:
                while True:
                    item = results.get()
                    if item is None:
                        break
                    if isinstance(item, BaseException):
                        yield _sse("error", {"message": str(item)})
                        break
                    executed += 1
                    payload = json.loads(serialize_document(item))
                    yield _sse("protocol", payload)
                final = store.load_session(session_id)
                yield _sse("done", {
                    "executed": executed,
                    "pending-manual": len(final.pending_manual_entries),
                    "state": final.state.value,
                })
            finally:
                with executions_guard:
                    active_executions.discard(session_id)

        return StreamingResponse(event_stream(), media_type="text/event-stream")

    @app.get(API_PREFIX + "/sessions/{session_id}/pending-manual")
    def pending_manual(session_id: str) -> JSONResponse:
        session = store.load_session(session_id)
        return JSONResponse({
            "pending": [
                _pending_entry_view(session, entry)
                for entry in session.pending_manual_entries
            ],
        })

    @app.post(API_PREFIX + "/sessions/{session_id}/manual-results", status_code=201)
    async def submit_manual_result(session_id: str, request: Request) -> Response:
        body = await request.json()
        if not isinstance(body, dict):
            raise ValueError("manual result submission must be a JSON object")
        for field in ("plan-entry-id", "assessor-id", "step-observations",
                      "outcome", "rationale"):
            if field not in body:
                raise ValueError(f"missing field {field!r}")
        session = store.load_session(session_id)
        if session.report is not None:
            raise WrongStateError(f"session {session_id} is already ASSESSED")
        try:
            entry = session.plan.entry(body["plan-entry-id"])
        except KeyError:
            raise NotFoundError(
                f"no plan entry {body['plan-entry-id']!r} in session {session_id}"
            ) from None
        try:
            outcome = Outcome[body["outcome"]]
        except KeyError:
            raise ValueError(f"unknown outcome {body['outcome']!r}") from None
        raw_steps = body["step-observations"]
        if not isinstance(raw_steps, list) or any(
            not isinstance(step, list) for step in raw_steps
        ):
            raise ValueError("step-observations must be a list of lists of text")
        observations = [
            [Observation.text(str(text)) for text in step if str(text).strip()]
            for step in raw_steps
        ]
        protocol = record_manual_result(
            entry, str(body["assessor-id"]), observations, outcome,
            str(body["rationale"]),
        )
        store.append_protocol(session_id, protocol)
        return _document_response(protocol, status=201)

    @app.post(API_PREFIX + "/sessions/{session_id}/assess")
    def assess_session(session_id: str, request: Request) -> Response:
        scheme_id = request.query_params.get("scheme-id")
        if not scheme_id:
            raise ValueError("query parameter scheme-id is required")
        session = store.load_session(session_id)
        if session.report is not None:
            raise WrongStateError(f"session {session_id} is already ASSESSED")
        if not session.all_covered:
            pending = ", ".join(e.plan_entry_id for e in session.pending_entries)
            raise WrongStateError(
                f"session {session_id} still has pending entries: {pending}"
            )
        scheme = _load_scheme(schemes_path, scheme_id)
        verdicts = [
            derive_case_verdict(protocol, session.catalog.case(protocol.case_id), scheme)
            for protocol in session.protocols
        ]
        overall = aggregate(verdicts, scheme, session.plan)
        report, _ = render_report(session.plan, session.protocols, verdicts, overall)
        store.append_assessment(session_id, scheme, report)
        return _document_response(report)

    @app.get(API_PREFIX + "/sessions/{session_id}/report")
    def get_report(session_id: str, format: str = "machine") -> Response:
        session = store.load_session(session_id)
        if session.report is None:
            raise WrongStateError(f"session {session_id} is not assessed yet")
        if format == "text":
            text = render_text_from_report(session.report, session.plan, session.protocols)
            return PlainTextResponse(text)
        if format != "machine":
            raise ValueError(f"unknown report format {format!r}")
        return _document_response(session.report)

    if assets_dir and Path(assets_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(assets_dir), html=True), name="console")

    return app
