"""Test plan execution: automated dispatch, manual recording, protocols.

Automated entries are dispatched to executors registered by capability token;
manual and semi-automated entries are returned as pending and completed
through :func:`record_manual_result`. Every execution produces exactly one
machine-readable :class:`ExecutionProtocol`; executor crashes and timeouts
are contained as ERROR outcomes, never escaping exceptions.
"""

from __future__ import annotations

import enum
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Iterable

from .documents import (
    DocumentInvariantError,
    DocumentSchemaError,
    Reader,
    register_codec,
)
from .filtering import PlannedTest, TestPlan

DEFAULT_TIMEOUT_SECONDS = 30.0
TIMEOUT_ENV_VAR = "IOTSAM_PROBE_TIMEOUT_SECS"
TIMEOUT_PARAMETER = "timeout-seconds"

MANUAL_EXECUTOR_IDENTITY = "manual"

_SHA256_RE = re.compile(r"^[0-9a-f]{64}$")


def iso_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class HarnessError(Exception):
    code = "HARNESS"


class DuplicateCapabilityError(HarnessError):
    code = "DUPLICATE_CAPABILITY"


class UnknownCapabilityError(HarnessError):
    code = "UNKNOWN_CAPABILITY"


class StepCountMismatchError(HarnessError):
    code = "STEP_COUNT_MISMATCH"


class InvalidOutcomeError(HarnessError):
    code = "INVALID_OUTCOME"


class Outcome(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"
    SKIPPED = "SKIPPED"
    ERROR = "ERROR"


MANUAL_OUTCOMES = frozenset({
    Outcome.PASS, Outcome.FAIL, Outcome.INCONCLUSIVE, Outcome.SKIPPED,
})


class ObservationKind(enum.Enum):
    TEXT = "TEXT"
    PORT_LIST = "PORT_LIST"
    BANNER = "BANNER"
    TLS_POSTURE = "TLS_POSTURE"
    CREDENTIAL_RESULT = "CREDENTIAL_RESULT"
    EVIDENCE_DIGEST = "EVIDENCE_DIGEST"


@dataclass(frozen=True)
class Observation:
    """One captured fact; payload shape is determined by the kind."""

    kind: ObservationKind
    payload: Any
    captured_at: str

    @staticmethod
    def text(text: str, *, captured_at: str | None = None) -> "Observation":
        return Observation(ObservationKind.TEXT, text, captured_at or iso_now())

    @staticmethod
    def port_list(ports: Iterable[int], *, captured_at: str | None = None) -> "Observation":
        return Observation(
            ObservationKind.PORT_LIST, tuple(sorted(ports)), captured_at or iso_now()
        )

    @staticmethod
    def banner(text: str, unprompted: bool, *, captured_at: str | None = None) -> "Observation":
        return Observation(
            ObservationKind.BANNER,
            {"text": text, "unprompted": unprompted},
            captured_at or iso_now(),
        )

    @staticmethod
    def tls_posture(versions: Iterable[str], self_signed: bool, not_after: str,
                    *, captured_at: str | None = None) -> "Observation":
        return Observation(
            ObservationKind.TLS_POSTURE,
            {"versions": tuple(sorted(versions)), "self-signed": self_signed,
             "not-after": not_after},
            captured_at or iso_now(),
        )

    @staticmethod
    def credential_result(accepted: Iterable[tuple[str, str]], attempted: int,
                          *, captured_at: str | None = None) -> "Observation":
        return Observation(
            ObservationKind.CREDENTIAL_RESULT,
            {"accepted": tuple({"username": u, "password": p} for u, p in accepted),
             "attempted": attempted},
            captured_at or iso_now(),
        )

    @staticmethod
    def evidence_digest(sha256: str, ref: str | None = None,
                        *, captured_at: str | None = None) -> "Observation":
        payload = {"sha256": sha256}
        if ref is not None:
            payload["ref"] = ref
        return Observation(ObservationKind.EVIDENCE_DIGEST, payload, captured_at or iso_now())


@dataclass(frozen=True)
class StepRecord:
    step: str
    observations: tuple[Observation, ...] = ()


@dataclass(frozen=True)
class ExecutionProtocol:
    protocol_id: str
    plan_entry_id: str
    case_id: str
    executor_identity: str
    executor_version: str  # assessor-id on the manual path
    started_at: str
    ended_at: str
    steps_performed: tuple[StepRecord, ...]
    outcome: Outcome
    outcome_rationale: str


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    type: str  # text | integer | boolean
    required: bool = True


@dataclass(frozen=True)
class ExecutorDescriptor:
    capability: str
    version: str
    parameters: tuple[ParameterSpec, ...] = ()
    produces: tuple[ObservationKind, ...] = ()


@dataclass
class ExecutorRun:
    """What an executor behavior returns: steps with observations and a verdict."""

    steps: tuple[StepRecord, ...]
    outcome: Outcome
    rationale: str


ExecutorBehavior = Callable[[str, dict], ExecutorRun]


class ExecutorRegistry:
    """Capability token -> (descriptor, behavior); read-only during execution."""

    def __init__(self) -> None:
        self._executors: dict[str, tuple[ExecutorDescriptor, ExecutorBehavior]] = {}

    def register(self, descriptor: ExecutorDescriptor, behavior: ExecutorBehavior) -> None:
        if descriptor.capability in self._executors:
            raise DuplicateCapabilityError(
                f"capability {descriptor.capability!r} already registered"
            )
        self._executors[descriptor.capability] = (descriptor, behavior)

    def lookup(self, capability: str) -> tuple[ExecutorDescriptor, ExecutorBehavior]:
        try:
            return self._executors[capability]
        except KeyError:
            raise UnknownCapabilityError(
                f"no executor registered for capability {capability!r}"
            ) from None

    def descriptors(self) -> list[ExecutorDescriptor]:
        return [self._executors[token][0] for token in sorted(self._executors)]


def _coerce_parameter(spec: ParameterSpec, value: Any) -> Any:
    if spec.type == "integer":
        if isinstance(value, bool):
            raise ValueError(f"parameter {spec.name!r} expects an integer")
        if isinstance(value, int):
            return value
        if isinstance(value, str) and re.fullmatch(r"-?\d+", value.strip()):
            return int(value)
        raise ValueError(f"parameter {spec.name!r} expects an integer, got {value!r}")
    if spec.type == "boolean":
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ValueError(f"parameter {spec.name!r} expects a boolean, got {value!r}")
    if isinstance(value, str):
        return value
    return str(value)


def validate_parameters(descriptor: ExecutorDescriptor, parameters: dict) -> dict:
    """Coerce and check resolved parameters against the executor's schema."""
    known = {spec.name: spec for spec in descriptor.parameters}
    out: dict[str, Any] = {}
    for name, value in parameters.items():
        spec = known.get(name)
        if spec is None:
            raise ValueError(
                f"executor {descriptor.capability!r} accepts no parameter {name!r}"
            )
        out[name] = _coerce_parameter(spec, value)
    for spec in descriptor.parameters:
        if spec.required and spec.name not in out:
            raise ValueError(
                f"executor {descriptor.capability!r} requires parameter {spec.name!r}"
            )
    return out


def resolve_timeout(parameters: dict) -> float:
    """Per-entry timeout: entry parameter, then env override, then default."""
    raw = parameters.get(TIMEOUT_PARAMETER)
    if raw is not None:
        return float(raw)
    env = os.environ.get(TIMEOUT_ENV_VAR)
    if env:
        return float(env)
    return DEFAULT_TIMEOUT_SECONDS


def protocol_id_for(entry: PlannedTest) -> str:
    return f"exec-{entry.plan_entry_id}"


def execute_automated(entry: PlannedTest, registry: ExecutorRegistry,
                      *, clock: Callable[[], str] = iso_now) -> ExecutionProtocol:
    """Run one automated entry; crashes and timeouts become ERROR protocols.

    Raises ``UnknownCapabilityError`` if the entry names an unregistered
    capability, and ``ValueError`` on precondition violations (wrong mode or
    parameters outside the executor's schema); everything that happens inside
    the executor is contained.
    """
    from .model import ExecutionMode

    if entry.execution_mode is not ExecutionMode.AUTOMATED:
        raise ValueError(
            f"entry {entry.plan_entry_id!r} is {entry.execution_mode.value}, not AUTOMATED"
        )
    if entry.executor_ref is None:
        raise ValueError(f"entry {entry.plan_entry_id!r} lacks executor-ref")
    descriptor, behavior = registry.lookup(entry.executor_ref.capability)
    raw_parameters = dict(entry.executor_ref.parameters)
    timeout = resolve_timeout(raw_parameters)
    raw_parameters.pop(TIMEOUT_PARAMETER, None)
    parameters = validate_parameters(descriptor, raw_parameters)

    started = clock()
    box: dict[str, Any] = {}

    def target() -> None:
        try:
            box["run"] = behavior(entry.case_id, parameters)
        except BaseException as exc:  # noqa: BLE001 - containment is the contract
            box["exc"] = exc

    worker = threading.Thread(target=target, daemon=True)
    worker.start()
    worker.join(timeout)

    if worker.is_alive():
        return ExecutionProtocol(
            protocol_id=protocol_id_for(entry),
            plan_entry_id=entry.plan_entry_id,
            case_id=entry.case_id,
            executor_identity=descriptor.capability,
            executor_version=descriptor.version,
            started_at=started,
            ended_at=clock(),
            steps_performed=(),
            outcome=Outcome.ERROR,
            outcome_rationale=f"executor timed out after {timeout:g}s",
        )
    if "exc" in box:
        exc = box["exc"]
        return ExecutionProtocol(
            protocol_id=protocol_id_for(entry),
            plan_entry_id=entry.plan_entry_id,
            case_id=entry.case_id,
            executor_identity=descriptor.capability,
            executor_version=descriptor.version,
            started_at=started,
            ended_at=clock(),
            steps_performed=(),
            outcome=Outcome.ERROR,
            outcome_rationale=f"executor raised {type(exc).__name__}: {exc}",
        )
    run: ExecutorRun = box["run"]
    return ExecutionProtocol(
        protocol_id=protocol_id_for(entry),
        plan_entry_id=entry.plan_entry_id,
        case_id=entry.case_id,
        executor_identity=descriptor.capability,
        executor_version=descriptor.version,
        started_at=started,
        ended_at=clock(),
        steps_performed=tuple(run.steps),
        outcome=run.outcome,
        outcome_rationale=run.rationale,
    )


def record_manual_result(entry: PlannedTest, assessor_id: str,
                         step_observations: list[list[Observation]],
                         outcome: Outcome, rationale: str,
                         *, clock: Callable[[], str] = iso_now) -> ExecutionProtocol:
    """Record one manual or semi-automated execution from assessor input."""
    from .model import ExecutionMode

    if entry.execution_mode is ExecutionMode.AUTOMATED:
        raise ValueError(
            f"entry {entry.plan_entry_id!r} is AUTOMATED; use execute_automated"
        )
    if outcome not in MANUAL_OUTCOMES:
        raise InvalidOutcomeError(
            f"outcome {outcome.value} is reserved for the automated path"
        )
    if len(step_observations) != len(entry.instantiated_guide):
        raise StepCountMismatchError(
            f"entry {entry.plan_entry_id!r} has {len(entry.instantiated_guide)} "
            f"guide steps but {len(step_observations)} observation lists were given"
        )
    started = clock()
    steps = tuple(
        StepRecord(step, tuple(observations))
        for step, observations in zip(entry.instantiated_guide, step_observations)
    )
    return ExecutionProtocol(
        protocol_id=protocol_id_for(entry),
        plan_entry_id=entry.plan_entry_id,
        case_id=entry.case_id,
        executor_identity=MANUAL_EXECUTOR_IDENTITY,
        executor_version=assessor_id,
        started_at=started,
        ended_at=clock(),
        steps_performed=steps,
        outcome=outcome,
        outcome_rationale=rationale,
    )


def _contained_execute(entry: PlannedTest, registry: ExecutorRegistry,
                       clock: Callable[[], str]) -> ExecutionProtocol:
    try:
        return execute_automated(entry, registry, clock=clock)
    except Exception as exc:  # containment: plan execution never aborts per entry
        capability = entry.executor_ref.capability if entry.executor_ref else "unknown"
        code = getattr(exc, "code", type(exc).__name__)
        return ExecutionProtocol(
            protocol_id=protocol_id_for(entry),
            plan_entry_id=entry.plan_entry_id,
            case_id=entry.case_id,
            executor_identity=capability,
            executor_version="unresolved",
            started_at=clock(),
            ended_at=clock(),
            steps_performed=(),
            outcome=Outcome.ERROR,
            outcome_rationale=f"{code}: {exc}",
        )


def execute_plan(plan: TestPlan, registry: ExecutorRegistry,
                 session_sink: Callable[[ExecutionProtocol], None] | None = None,
                 parallelism_limit: int = 1,
                 *, clock: Callable[[], str] = iso_now,
                 ) -> tuple[list[ExecutionProtocol], list[PlannedTest]]:
    """Execute all automated entries of a plan; return (protocols, pending).

    Automated entries run concurrently up to ``parallelism_limit``; protocols
    are forwarded to ``session_sink`` in canonical plan order regardless of
    completion order. Manual and semi-automated entries are returned pending.
    """
    from .model import ExecutionMode

    if parallelism_limit < 1:
        raise ValueError("parallelism-limit must be >= 1")
    automated = [e for e in plan.entries if e.execution_mode is ExecutionMode.AUTOMATED]
    pending = [e for e in plan.entries if e.execution_mode is not ExecutionMode.AUTOMATED]

    protocols: list[ExecutionProtocol] = []
    if automated:
        with ThreadPoolExecutor(max_workers=parallelism_limit) as pool:
            futures = [
                pool.submit(_contained_execute, entry, registry, clock)
                for entry in automated
            ]
            # iterate in plan order so the sink sees canonical ordering
            for future in futures:
                protocol = future.result()
                protocols.append(protocol)
                if session_sink is not None:
                    session_sink(protocol)
    return protocols, pending


# ---------------------------------------------------------------------------
# Document codec


def _observation_payload_obj(obs: Observation) -> Any:
    kind, payload = obs.kind, obs.payload
    if kind is ObservationKind.TEXT:
        return payload
    if kind is ObservationKind.PORT_LIST:
        return list(payload)
    if kind is ObservationKind.BANNER:
        return {"text": payload["text"], "unprompted": payload["unprompted"]}
    if kind is ObservationKind.TLS_POSTURE:
        return {
            "versions": list(payload["versions"]),
            "self-signed": payload["self-signed"],
            "not-after": payload["not-after"],
        }
    if kind is ObservationKind.CREDENTIAL_RESULT:
        return {
            "accepted": [
                {"username": pair["username"], "password": pair["password"]}
                for pair in payload["accepted"]
            ],
            "attempted": payload["attempted"],
        }
    out = {"sha256": payload["sha256"]}
    if "ref" in payload:
        out["ref"] = payload["ref"]
    return out


def _observation_payload(obs: Observation) -> dict:
    return {
        "kind": obs.kind.value,
        "payload": _observation_payload_obj(obs),
        "captured-at": obs.captured_at,
    }


def _parse_observation(reader: Reader) -> Observation:
    kind = reader.token_field("kind", ObservationKind)
    raw = reader.raw_field("payload")
    path = f"{reader.path}.payload"
    if kind is ObservationKind.TEXT:
        if not isinstance(raw, str):
            raise DocumentSchemaError("TEXT payload must be text", path=path)
        payload: Any = raw
    elif kind is ObservationKind.PORT_LIST:
        if not isinstance(raw, list) or any(
            isinstance(p, bool) or not isinstance(p, int) for p in raw
        ):
            raise DocumentSchemaError("PORT_LIST payload must be a list of integers", path=path)
        payload = tuple(raw)
    elif kind is ObservationKind.BANNER:
        child = reader.child(raw, path)
        payload = {"text": child.str_field("text"), "unprompted": child.bool_field("unprompted")}
        child.finish()
    elif kind is ObservationKind.TLS_POSTURE:
        child = reader.child(raw, path)
        versions = child.list_field("versions")
        for i, v in enumerate(versions):
            if not isinstance(v, str):
                raise DocumentSchemaError("version must be text", path=f"{path}.versions[{i}]")
        payload = {
            "versions": tuple(versions),
            "self-signed": child.bool_field("self-signed"),
            "not-after": child.str_field("not-after"),
        }
        child.finish()
    elif kind is ObservationKind.CREDENTIAL_RESULT:
        child = reader.child(raw, path)
        accepted_raw = child.list_field("accepted")
        accepted = []
        for i, item in enumerate(accepted_raw):
            pair = reader.child(item, f"{path}.accepted[{i}]")
            accepted.append({
                "username": pair.str_field("username"),
                "password": pair.str_field("password"),
            })
            pair.finish()
        payload = {"accepted": tuple(accepted), "attempted": child.int_field("attempted")}
        child.finish()
    else:  # EVIDENCE_DIGEST
        child = reader.child(raw, path)
        sha256 = child.str_field("sha256")
        if not _SHA256_RE.fullmatch(sha256):
            raise DocumentInvariantError(
                "evidence digest must be a 64-char lowercase sha-256 hex string",
                path=f"{path}.sha256",
            )
        payload = {"sha256": sha256}
        ref = child.str_field("ref", optional=True)
        if ref is not None:
            payload["ref"] = ref
        child.finish()
    captured_at = reader.timestamp_field("captured-at")
    reader.finish()
    return Observation(kind, payload, captured_at)


def _protocol_payload(protocol: ExecutionProtocol) -> dict:
    return {
        "protocol-id": protocol.protocol_id,
        "plan-entry-id": protocol.plan_entry_id,
        "case-id": protocol.case_id,
        "executor-identity": protocol.executor_identity,
        "executor-version": protocol.executor_version,
        "started-at": protocol.started_at,
        "ended-at": protocol.ended_at,
        "steps-performed": [
            {
                "step": record.step,
                "observations": [_observation_payload(o) for o in record.observations],
            }
            for record in protocol.steps_performed
        ],
        "outcome": protocol.outcome.value,
        "outcome-rationale": protocol.outcome_rationale,
    }


def _protocol_from(reader: Reader) -> ExecutionProtocol:
    protocol_id = reader.str_field("protocol-id")
    plan_entry_id = reader.str_field("plan-entry-id")
    case_id = reader.str_field("case-id")
    executor_identity = reader.str_field("executor-identity")
    executor_version = reader.str_field("executor-version")
    started_at = reader.timestamp_field("started-at")
    ended_at = reader.timestamp_field("ended-at")
    raw_steps = reader.list_field("steps-performed")
    steps = []
    for i, item in enumerate(raw_steps):
        child = reader.child(item, f"steps-performed[{i}]")
        step = child.str_field("step")
        raw_obs = child.list_field("observations")
        observations = tuple(
            _parse_observation(child.child(o, f"{child.path}.observations[{j}]"))
            for j, o in enumerate(raw_obs)
        )
        child.finish()
        steps.append(StepRecord(step, observations))
    outcome = reader.token_field("outcome", Outcome)
    rationale = reader.str_field("outcome-rationale")
    reader.finish()
    if datetime.fromisoformat(ended_at) < datetime.fromisoformat(started_at):
        raise DocumentInvariantError(
            f"protocol {protocol_id!r} ended before it started", path="ended-at"
        )
    return ExecutionProtocol(
        protocol_id, plan_entry_id, case_id, executor_identity, executor_version,
        started_at, ended_at, tuple(steps), outcome, rationale,
    )


register_codec("execution-protocol", ExecutionProtocol, _protocol_payload, _protocol_from)
