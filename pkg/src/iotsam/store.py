"""Append-only persistence for assessment sessions.

Event-sourced flat-file store: one directory per session, numbered record
files ``NNNN-<kind>.json`` in the canonical document format. Each record
carries a sha-256 digest of its predecessor's file bytes, so any prefix of
the log replays to a valid state and tampering or truncation is detected.
Writes take a per-session lock file; reads are lock-free.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import re
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from filelock import FileLock, Timeout

from .documents import (
    DocumentError,
    Reader,
    document_object,
    parse_document,
    register_codec,
)
from .execution import ExecutionProtocol, iso_now
from .filtering import PlannedTest, TestPlan
from .model import (
    AssessmentScheme,
    DeviceModel,
    ExecutionMode,
    TestCaseCatalog,
    TestingProfile,
)

GENESIS_DIGEST = "0" * 64

_RECORD_FILE_RE = re.compile(r"^(\d{4})-([a-z-]+)\.json$")
_SEED_KINDS = ("device-model", "testing-profile", "test-catalog", "test-plan")


class StoreError(Exception):
    code = "STORE"


class InconsistentReferencesError(StoreError):
    code = "INCONSISTENT_REFERENCES"


class DuplicateEntryError(StoreError):
    code = "DUPLICATE_ENTRY"


class WrongStateError(StoreError):
    code = "WRONG_STATE"


class NotFoundError(StoreError):
    code = "NOT_FOUND"


class CorruptLogError(StoreError):
    code = "CORRUPT_LOG"


class SessionState(enum.Enum):
    PLANNED = "PLANNED"
    EXECUTING = "EXECUTING"
    AWAITING_MANUAL = "AWAITING_MANUAL"
    ASSESSED = "ASSESSED"


@dataclass(frozen=True)
class SessionRecord:
    sequence: int
    record_kind: str
    prev_digest: str
    appended_at: str
    payload: Any  # the embedded typed document value


def _record_payload(record: SessionRecord) -> dict:
    return {
        "sequence": record.sequence,
        "record-kind": record.record_kind,
        "prev-digest": record.prev_digest,
        "appended-at": record.appended_at,
        "payload": document_object(record.payload),
    }


def _record_from(reader: Reader) -> SessionRecord:
    sequence = reader.int_field("sequence")
    record_kind = reader.str_field("record-kind")
    prev_digest = reader.str_field("prev-digest")
    appended_at = reader.timestamp_field("appended-at")
    raw = reader.raw_field("payload")
    reader.finish()
    payload = parse_document(json.dumps(raw), record_kind)
    return SessionRecord(sequence, record_kind, prev_digest, appended_at, payload)


register_codec("session-record", SessionRecord, _record_payload, _record_from)


@dataclass
class Session:
    """Reconstructed view of one session's event log."""

    session_id: str
    device: DeviceModel
    profile: TestingProfile
    catalog: TestCaseCatalog
    plan: TestPlan
    protocols: list[ExecutionProtocol] = field(default_factory=list)
    scheme: AssessmentScheme | None = None
    report: Any = None  # AssessmentReport once assessed
    records: list[SessionRecord] = field(default_factory=list)

    @property
    def covered_entry_ids(self) -> set[str]:
        return {p.plan_entry_id for p in self.protocols}

    @property
    def pending_entries(self) -> list[PlannedTest]:
        covered = self.covered_entry_ids
        return [e for e in self.plan.entries if e.plan_entry_id not in covered]

    @property
    def pending_manual_entries(self) -> list[PlannedTest]:
        return [
            e for e in self.pending_entries
            if e.execution_mode is not ExecutionMode.AUTOMATED
        ]

    @property
    def all_covered(self) -> bool:
        return not self.pending_entries

    @property
    def state(self) -> SessionState:
        if self.report is not None:
            return SessionState.ASSESSED
        if not self.protocols:
            return SessionState.PLANNED
        covered = self.covered_entry_ids
        automated_uncovered = any(
            e.execution_mode is ExecutionMode.AUTOMATED and e.plan_entry_id not in covered
            for e in self.plan.entries
        )
        if automated_uncovered:
            return SessionState.EXECUTING
        has_manual = any(
            e.execution_mode is not ExecutionMode.AUTOMATED for e in self.plan.entries
        )
        return SessionState.AWAITING_MANUAL if has_manual else SessionState.EXECUTING


def _check_consistency(device: DeviceModel, profile: TestingProfile,
                       catalog: TestCaseCatalog, plan: TestPlan) -> None:
    if plan.device_id != device.device_id:
        raise InconsistentReferencesError(
            f"plan targets device {plan.device_id!r}, got {device.device_id!r}"
        )
    if plan.profile_id != profile.profile_id:
        raise InconsistentReferencesError(
            f"plan was filtered with profile {plan.profile_id!r}, got {profile.profile_id!r}"
        )
    if plan.catalog_id != catalog.catalog_id or plan.catalog_version != catalog.version:
        raise InconsistentReferencesError(
            f"plan draws on catalog {plan.catalog_id!r} v{plan.catalog_version}, "
            f"got {catalog.catalog_id!r} v{catalog.version}"
        )
    case_ids = {case.case_id for case in catalog.cases}
    component_ids = {comp.component_id for comp in device.components}
    for entry in plan.entries:
        if entry.case_id not in case_ids:
            raise InconsistentReferencesError(
                f"plan entry {entry.plan_entry_id!r} references unknown case "
                f"{entry.case_id!r}"
            )
        if entry.target_component_id not in component_ids:
            raise InconsistentReferencesError(
                f"plan entry {entry.plan_entry_id!r} targets unknown component "
                f"{entry.target_component_id!r}"
            )


class CampaignStore:
    """Store rooted at a directory; one subdirectory per session."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- paths and locks

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _session_lock(self, session_id: str) -> FileLock:
        return FileLock(self._session_dir(session_id) / ".writer.lock", timeout=30)

    def _store_lock(self) -> FileLock:
        return FileLock(self.root / ".store.lock", timeout=30)

    # -- record IO

    def _record_files(self, session_id: str) -> list[tuple[int, str, Path]]:
        directory = self._session_dir(session_id)
        out = []
        for path in directory.iterdir():
            match = _RECORD_FILE_RE.match(path.name)
            if match:
                out.append((int(match.group(1)), match.group(2), path))
        return sorted(out)

    def _append_record(self, session_id: str, value: Any,
                       clock: Callable[[], str] = iso_now) -> SessionRecord:
        """Caller must hold the session writer lock."""
        files = self._record_files(session_id)
        sequence = len(files)
        prev_digest = GENESIS_DIGEST
        if files:
            prev_digest = hashlib.sha256(files[-1][2].read_bytes()).hexdigest()
        from .documents import kind_of, serialize_document

        record = SessionRecord(sequence, kind_of(value), prev_digest, clock(), value)
        data = serialize_document(record)
        directory = self._session_dir(session_id)
        final = directory / f"{sequence:04d}-{record.record_kind}.json"
        temp = directory / f".{final.name}.tmp"
        temp.write_bytes(data)
        os.replace(temp, final)
        return record

    # -- public operations

    def create_session(self, device: DeviceModel, profile: TestingProfile,
                       catalog: TestCaseCatalog, plan: TestPlan,
                       *, clock: Callable[[], str] = iso_now) -> str:
        """Persist a new session in PLANNED state; returns its stable id."""
        _check_consistency(device, profile, catalog, plan)
        with self._store_lock():
            existing = [
                int(p.name.split("-", 1)[0])
                for p in self.root.iterdir()
                if p.is_dir() and re.match(r"^\d{4}-", p.name)
            ]
            number = max(existing, default=0) + 1
            session_id = f"{number:04d}-{uuid.uuid4().hex[:8]}"
            directory = self._session_dir(session_id)
            directory.mkdir()
        with self._session_lock(session_id):
            for value in (device, profile, catalog, plan):
                self._append_record(session_id, value, clock)
        return session_id

    def append_protocol(self, session_id: str, protocol: ExecutionProtocol,
                        *, clock: Callable[[], str] = iso_now) -> SessionState:
        """Append one execution protocol; returns the session's new state."""
        with self._acquire_writer(session_id):
            session = self.load_session(session_id)
            if session.state is SessionState.ASSESSED:
                raise WrongStateError(
                    f"session {session_id} is already ASSESSED; no further "
                    "protocols can be recorded"
                )
            try:
                session.plan.entry(protocol.plan_entry_id)
            except KeyError:
                raise InconsistentReferencesError(
                    f"protocol references unknown plan entry {protocol.plan_entry_id!r}"
                ) from None
            if protocol.plan_entry_id in session.covered_entry_ids:
                raise DuplicateEntryError(
                    f"plan entry {protocol.plan_entry_id!r} already has a recorded protocol"
                )
            self._append_record(session_id, protocol, clock)
        return self.load_session(session_id).state

    def append_assessment(self, session_id: str, scheme: AssessmentScheme,
                          report: Any, *, clock: Callable[[], str] = iso_now) -> SessionState:
        """Record the scheme used and the assessment report; moves to ASSESSED."""
        with self._acquire_writer(session_id):
            session = self.load_session(session_id)
            if session.state is SessionState.ASSESSED:
                raise WrongStateError(f"session {session_id} is already ASSESSED")
            if not session.all_covered:
                pending = ", ".join(e.plan_entry_id for e in session.pending_entries)
                raise WrongStateError(
                    f"session {session_id} still has pending entries: {pending}. "
                    "Record the remaining results (iotsam run --interactive) before assessing."
                )
            self._append_record(session_id, scheme, clock)
            self._append_record(session_id, report, clock)
        return SessionState.ASSESSED

    def _acquire_writer(self, session_id: str):
        if not self._session_dir(session_id).is_dir():
            raise NotFoundError(f"no session {session_id!r} in store {self.root}")
        try:
            # acquire() returns a proxy whose context-exit releases the lock
            return self._session_lock(session_id).acquire()
        except Timeout:
            raise WrongStateError(
                f"session {session_id} is locked by another writer"
            ) from None

    def load_session(self, session_id: str) -> Session:
        """Replay the event log; verifies the record hash chain."""
        directory = self._session_dir(session_id)
        if not directory.is_dir():
            raise NotFoundError(f"no session {session_id!r} in store {self.root}")
        files = self._record_files(session_id)
        if len(files) < len(_SEED_KINDS):
            raise CorruptLogError(
                f"session {session_id}: log truncated, found only {len(files)} records"
            )
        records: list[SessionRecord] = []
        prev_bytes: bytes | None = None
        for position, (sequence, kind, path) in enumerate(files):
            if sequence != position:
                raise CorruptLogError(
                    f"session {session_id}: record sequence gap at {path.name}"
                )
            data = path.read_bytes()
            try:
                record = parse_document(data, "session-record")
            except DocumentError as exc:
                raise CorruptLogError(
                    f"session {session_id}: unreadable record {path.name}: {exc}"
                ) from None
            expected = GENESIS_DIGEST if prev_bytes is None \
                else hashlib.sha256(prev_bytes).hexdigest()
            if record.prev_digest != expected or record.sequence != sequence \
                    or record.record_kind != kind:
                raise CorruptLogError(
                    f"session {session_id}: hash chain mismatch at {path.name}"
                )
            records.append(record)
            prev_bytes = data

        for i, kind in enumerate(_SEED_KINDS):
            if records[i].record_kind != kind:
                raise CorruptLogError(
                    f"session {session_id}: record {i} should be {kind}, "
                    f"found {records[i].record_kind}"
                )
        session = Session(
            session_id=session_id,
            device=records[0].payload,
            profile=records[1].payload,
            catalog=records[2].payload,
            plan=records[3].payload,
            records=records,
        )
        for record in records[len(_SEED_KINDS):]:
            if record.record_kind == "execution-protocol":
                session.protocols.append(record.payload)
            elif record.record_kind == "assessment-scheme":
                session.scheme = record.payload
            elif record.record_kind == "assessment-report":
                session.report = record.payload
            else:
                raise CorruptLogError(
                    f"session {session_id}: unexpected record kind "
                    f"{record.record_kind!r} at sequence {record.sequence}"
                )
        return session

    def list_sessions(self) -> list[str]:
        """Session ids in creation order."""
        return sorted(
            p.name for p in self.root.iterdir()
            if p.is_dir() and re.match(r"^\d{4}-", p.name)
        )
