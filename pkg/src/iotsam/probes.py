"""Bundled automated executors: network-level probes and their verdict rules.

Four capabilities cover the "basic network tooling" class: TCP port scanning,
banner grabbing, TLS posture checks, and default-credential checks against
telnet and HTTP basic-auth endpoints. All probes are side-effect-bounded:
nothing is written to the target beyond protocol handshakes and the
configured credential attempts.
"""

from __future__ import annotations

import base64
import http.client
import re
import socket
import ssl
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path

from .execution import (
    ExecutorDescriptor,
    ExecutorRegistry,
    ExecutorRun,
    Observation,
    ObservationKind,
    Outcome,
    ParameterSpec,
    StepRecord,
)

PROBE_VERSION = "1.0.0"

CREDENTIAL_THROTTLE_SECONDS = 0.5  # at most 2 attempts per second

TLS_VERSION_NAMES = ("tls1.0", "tls1.1", "tls1.2", "tls1.3")
_TLS_VERSIONS = {
    "tls1.0": ssl.TLSVersion.TLSv1,
    "tls1.1": ssl.TLSVersion.TLSv1_1,
    "tls1.2": ssl.TLSVersion.TLSv1_2,
    "tls1.3": ssl.TLSVersion.TLSv1_3,
}

_VERSION_PATTERN = re.compile(r"\d+\.\d+")
_LOGIN_PROMPTS = (b"login:", b"username:")
_FAILURE_MARKERS = ("incorrect", "failed", "denied")
_SUCCESS_MARKERS = ("welcome", "# ", "$ ")


class ProbeError(Exception):
    code = "PROBE"


class HostUnreachableError(ProbeError):
    code = "HOST_UNREACHABLE"


class ConnectionRefusedProbeError(ProbeError):
    code = "CONNECTION_REFUSED"


class NotTlsError(ProbeError):
    code = "NOT_TLS"


class ServiceMismatchError(ProbeError):
    code = "SERVICE_MISMATCH"


class UnknownCaseError(ProbeError):
    code = "UNKNOWN_CASE"


@dataclass(frozen=True)
class ProbeTarget:
    host: str
    port: int
    connect_timeout_ms: int = 2000

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside 1-65535")
        if self.connect_timeout_ms <= 0:
            raise ValueError("connect timeout must be positive")

    @property
    def timeout(self) -> float:
        return self.connect_timeout_ms / 1000.0


@dataclass(frozen=True)
class TlsPosture:
    offered_versions: frozenset[str]
    self_signed: bool
    not_after: str

    def to_observation(self) -> Observation:
        return Observation.tls_posture(self.offered_versions, self.self_signed, self.not_after)


def _resolve(host: str) -> None:
    try:
        socket.getaddrinfo(host, None)
    except socket.gaierror as exc:
        raise HostUnreachableError(f"cannot resolve {host!r}: {exc}") from None


def tcp_port_scan(host: str, port_start: int, port_end: int,
                  parallelism: int = 32, connect_timeout_ms: int = 500) -> list[int]:
    """Sorted list of ports in [port_start, port_end] accepting a TCP connection."""
    if not (1 <= port_start <= port_end <= 65535):
        raise ValueError(f"invalid port range {port_start}-{port_end}")
    _resolve(host)
    timeout = connect_timeout_ms / 1000.0
    unreachable_errnos = {101, 113}  # ENETUNREACH, EHOSTUNREACH

    def attempt(port: int) -> tuple[int, bool, int | None]:
        try:
            with socket.create_connection((host, port), timeout=timeout):
                return port, True, None
        except ConnectionRefusedError:
            return port, False, None
        except OSError as exc:
            return port, False, exc.errno
        except Exception:
            return port, False, -1

    ports = range(port_start, port_end + 1)
    with ThreadPoolExecutor(max_workers=max(1, min(parallelism, len(ports)))) as pool:
        results = list(pool.map(attempt, ports))
    open_ports = sorted(port for port, is_open, _ in results if is_open)
    if not open_ports and results and all(
        errno in unreachable_errnos for _, _, errno in results if errno is not None
    ) and any(errno is not None for _, _, errno in results):
        raise HostUnreachableError(f"host {host!r} unreachable on every scanned port")
    return open_ports


def service_banner_grab(target: ProbeTarget) -> tuple[str, bool]:
    """(banner first line, sent-unprompted flag) for an open TCP service.

    Reads at most 1024 bytes. If the service stays silent a newline is sent
    to elicit output; a still-silent service yields an empty banner rather
    than an error.
    """
    try:
        sock = socket.create_connection((target.host, target.port), timeout=target.timeout)
    except ConnectionRefusedError as exc:
        raise ConnectionRefusedProbeError(
            f"{target.host}:{target.port} refused the connection"
        ) from exc
    with sock:
        sock.settimeout(target.timeout)
        data = _recv_once(sock)
        unprompted = bool(data)
        if not data:
            try:
                sock.sendall(b"\r\n")
            except OSError:
                return "", False
            data = _recv_once(sock)
        text = data[:1024].decode("utf-8", errors="replace")
        first_line = text.splitlines()[0].strip() if text.strip() else ""
        return first_line, unprompted


def _recv_once(sock: socket.socket) -> bytes:
    try:
        return sock.recv(1024)
    except (socket.timeout, OSError):
        return b""


def _client_context(version: ssl.TLSVersion) -> ssl.SSLContext:
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        ctx.minimum_version = version
        ctx.maximum_version = version
    # SECLEVEL=0 re-enables the legacy protocols OpenSSL 3 locks out by default
    ctx.set_ciphers("ALL:@SECLEVEL=0")
    return ctx


def tls_posture_check(target: ProbeTarget) -> TlsPosture:
    """One handshake attempt per TLS version; aggregate what the service offers."""
    offered: set[str] = set()
    cert_der: bytes | None = None
    for name, version in _TLS_VERSIONS.items():
        ctx = _client_context(version)
        try:
            with socket.create_connection((target.host, target.port), timeout=target.timeout) as raw:
                raw.settimeout(target.timeout)
                with ctx.wrap_socket(raw, server_hostname=target.host) as tls:
                    offered.add(name)
                    if cert_der is None:
                        cert_der = tls.getpeercert(binary_form=True)
        except (ssl.SSLError, OSError):
            continue
    if not offered:
        raise NotTlsError(
            f"{target.host}:{target.port} completed no TLS handshake at any version"
        )
    self_signed = False
    not_after = ""
    if cert_der:
        from cryptography import x509

        cert = x509.load_der_x509_certificate(cert_der)
        self_signed = cert.issuer == cert.subject
        not_after = cert.not_valid_after_utc.isoformat()
    return TlsPosture(frozenset(offered), self_signed, not_after)


def load_credential_list(path: str | Path | None = None) -> list[tuple[str, str]]:
    """``username:password`` lines; ``#`` starts a comment. None loads the bundled list."""
    if path is None:
        text = resources.files("iotsam").joinpath("data/default-credentials.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        username, _, password = line.partition(":")
        pairs.append((username, password))
    return pairs


def _read_until(sock: socket.socket, markers: tuple[bytes, ...], timeout: float) -> bytes:
    deadline = time.monotonic() + timeout
    buffer = b""
    while time.monotonic() < deadline:
        sock.settimeout(max(0.05, deadline - time.monotonic()))
        try:
            chunk = sock.recv(256)
        except (socket.timeout, OSError):
            break
        if not chunk:
            break
        buffer += chunk
        lowered = buffer.lower()
        if any(marker in lowered for marker in markers):
            break
    return buffer


def _telnet_attempt(target: ProbeTarget, username: str, password: str) -> bool:
    with socket.create_connection((target.host, target.port), timeout=target.timeout) as sock:
        greeting = _read_until(sock, _LOGIN_PROMPTS, target.timeout)
        if not any(marker in greeting.lower() for marker in _LOGIN_PROMPTS):
            raise ServiceMismatchError(
                f"{target.host}:{target.port} did not present a telnet login prompt"
            )
        sock.sendall(username.encode("utf-8") + b"\r\n")
        _read_until(sock, (b"password:",), target.timeout)
        sock.sendall(password.encode("utf-8") + b"\r\n")
        response = _read_until(sock, _LOGIN_PROMPTS + (b"# ", b"$ "), target.timeout)
        text = response.decode("utf-8", errors="replace").lower()
        if any(marker in text for marker in _FAILURE_MARKERS):
            return False
        return any(marker in text for marker in _SUCCESS_MARKERS)


def _http_basic_attempt(target: ProbeTarget, username: str, password: str) -> bool:
    conn = http.client.HTTPConnection(target.host, target.port, timeout=target.timeout)
    token = base64.b64encode(f"{username}:{password}".encode("utf-8")).decode("ascii")
    try:
        conn.request("GET", "/", headers={"Authorization": f"Basic {token}"})
        response = conn.getresponse()
        response.read()
        return 200 <= response.status < 300
    except (http.client.BadStatusLine, http.client.UnknownProtocol) as exc:
        raise ServiceMismatchError(
            f"{target.host}:{target.port} does not speak HTTP: {exc}"
        ) from None
    finally:
        conn.close()


def default_credential_check(target: ProbeTarget, service_kind: str,
                             credentials: list[tuple[str, str]],
                             ) -> tuple[list[tuple[str, str]], int]:
    """(accepted pairs, attempts made); throttled to two attempts per second."""
    if not credentials:
        raise ValueError("credential list must be non-empty")
    if service_kind not in ("telnet", "http-basic"):
        raise ValueError(f"unsupported service kind {service_kind!r}")
    attempt = _telnet_attempt if service_kind == "telnet" else _http_basic_attempt
    accepted: list[tuple[str, str]] = []
    for i, (username, password) in enumerate(credentials):
        if i:
            time.sleep(CREDENTIAL_THROTTLE_SECONDS)
        if attempt(target, username, password):
            accepted.append((username, password))
    return accepted, len(credentials)


# ---------------------------------------------------------------------------
# Verdict rules for the bundled catalog cases


def _single(observations: list[Observation], kind: ObservationKind) -> Observation:
    for obs in observations:
        if obs.kind is kind:
            return obs
    raise ValueError(f"expected a {kind.value} observation")


def _verdict_telnet_exposed(observations: list[Observation]) -> tuple[Outcome, str]:
    ports = _single(observations, ObservationKind.PORT_LIST).payload
    if ports:
        return Outcome.FAIL, f"remote administration port open: {', '.join(map(str, ports))}"
    return Outcome.PASS, "declared service port does not accept connections"

def _verdict_cert_expired(observations: list[Observation]) -> tuple[Outcome, str]:
    obs = _single(observations, ObservationKind.TLS_POSTURE)
    not_after = obs.payload["not-after"]
    if not_after and datetime.fromisoformat(not_after) < datetime.fromisoformat(obs.captured_at):
        return Outcome.FAIL, f"certificate expired {not_after}"
    return Outcome.PASS, f"certificate valid until {not_after or 'unknown'}"


def _verdict_legacy_tls(observations: list[Observation]) -> tuple[Outcome, str]:
    versions = set(_single(observations, ObservationKind.TLS_POSTURE).payload["versions"])
    legacy = sorted(versions & {"tls1.0", "tls1.1"})
    if legacy:
        return Outcome.FAIL, f"legacy protocol versions offered: {', '.join(legacy)}"
    return Outcome.PASS, f"only modern versions offered: {', '.join(sorted(versions))}"


def _verdict_default_credentials(observations: list[Observation]) -> tuple[Outcome, str]:
    payload = _single(observations, ObservationKind.CREDENTIAL_RESULT).payload
    accepted = payload["accepted"]
    if accepted:
        names = ", ".join(f"{p['username']}/{p['password']}" for p in accepted)
        return Outcome.FAIL, f"default credentials accepted: {names}"
    return Outcome.PASS, f"all {payload['attempted']} default credential pairs rejected"


def _verdict_banner_version(observations: list[Observation]) -> tuple[Outcome, str]:
    text = _single(observations, ObservationKind.BANNER).payload["text"]
    match = _VERSION_PATTERN.search(text)
    if match:
        return Outcome.FAIL, f"banner discloses version string {match.group(0)!r}: {text!r}"
    return Outcome.PASS, "banner discloses no version string"


_VERDICT_RULES = {
    "TC-NET-001": _verdict_telnet_exposed,
    "TC-NET-002": _verdict_cert_expired,
    "TC-NET-003": _verdict_legacy_tls,
    "TC-NET-004": _verdict_default_credentials,
    "TC-NET-005": _verdict_banner_version,
}


def verdict_map(case_id: str, observations: list[Observation]) -> tuple[Outcome, str]:
    """Pure pass/fail rule per bundled case over its probe observations."""
    rule = _VERDICT_RULES.get(case_id)
    if rule is None:
        raise UnknownCaseError(f"no verdict rule for case {case_id!r}")
    return rule(observations)


# ---------------------------------------------------------------------------
# Executor registration


def _timeout_ms(params: dict, default: int = 2000) -> int:
    return int(params.get("connect-timeout-ms", default))


def _run_port_scan(case_id: str, params: dict) -> ExecutorRun:
    host, start, end = params["host"], params["port-start"], params["port-end"]
    ports = tcp_port_scan(
        host, start, end,
        parallelism=int(params.get("parallelism", 32)),
        connect_timeout_ms=_timeout_ms(params, 500),
    )
    observation = Observation.port_list(ports)
    outcome, rationale = verdict_map(case_id, [observation])
    step = StepRecord(f"scan tcp ports {start}-{end} on {host}", (observation,))
    return ExecutorRun((step,), outcome, rationale)


def _run_banner_grab(case_id: str, params: dict) -> ExecutorRun:
    target = ProbeTarget(params["host"], params["port"], _timeout_ms(params))
    banner, unprompted = service_banner_grab(target)
    observation = Observation.banner(banner, unprompted)
    outcome, rationale = verdict_map(case_id, [observation])
    step = StepRecord(f"grab service banner from {target.host}:{target.port}", (observation,))
    return ExecutorRun((step,), outcome, rationale)


def _run_tls_posture(case_id: str, params: dict) -> ExecutorRun:
    target = ProbeTarget(params["host"], params["port"], _timeout_ms(params))
    posture = tls_posture_check(target)
    observation = posture.to_observation()
    outcome, rationale = verdict_map(case_id, [observation])
    step = StepRecord(
        f"attempt tls handshakes at every version against {target.host}:{target.port}",
        (observation,),
    )
    return ExecutorRun((step,), outcome, rationale)


def _run_credential_check(case_id: str, params: dict) -> ExecutorRun:
    target = ProbeTarget(params["host"], params["port"], _timeout_ms(params))
    credentials = load_credential_list(params.get("credential-list"))
    accepted, attempted = default_credential_check(target, params["service-kind"], credentials)
    observation = Observation.credential_result(accepted, attempted)
    outcome, rationale = verdict_map(case_id, [observation])
    step = StepRecord(
        f"try {attempted} default credential pairs against "
        f"{params['service-kind']} at {target.host}:{target.port}",
        (observation,),
    )
    return ExecutorRun((step,), outcome, rationale)


def bundled_descriptors() -> list[ExecutorDescriptor]:
    return [
        ExecutorDescriptor(
            capability="net.port-scan",
            version=PROBE_VERSION,
            parameters=(
                ParameterSpec("host", "text"),
                ParameterSpec("port-start", "integer"),
                ParameterSpec("port-end", "integer"),
                ParameterSpec("parallelism", "integer", required=False),
                ParameterSpec("connect-timeout-ms", "integer", required=False),
            ),
            produces=(ObservationKind.PORT_LIST,),
        ),
        ExecutorDescriptor(
            capability="net.banner-grab",
            version=PROBE_VERSION,
            parameters=(
                ParameterSpec("host", "text"),
                ParameterSpec("port", "integer"),
                ParameterSpec("connect-timeout-ms", "integer", required=False),
            ),
            produces=(ObservationKind.BANNER,),
        ),
        ExecutorDescriptor(
            capability="net.tls-posture",
            version=PROBE_VERSION,
            parameters=(
                ParameterSpec("host", "text"),
                ParameterSpec("port", "integer"),
                ParameterSpec("connect-timeout-ms", "integer", required=False),
            ),
            produces=(ObservationKind.TLS_POSTURE,),
        ),
        ExecutorDescriptor(
            capability="net.credential-check",
            version=PROBE_VERSION,
            parameters=(
                ParameterSpec("host", "text"),
                ParameterSpec("port", "integer"),
                ParameterSpec("service-kind", "text"),
                ParameterSpec("credential-list", "text", required=False),
                ParameterSpec("connect-timeout-ms", "integer", required=False),
            ),
            produces=(ObservationKind.CREDENTIAL_RESULT,),
        ),
    ]


_BEHAVIORS = {
    "net.port-scan": _run_port_scan,
    "net.banner-grab": _run_banner_grab,
    "net.tls-posture": _run_tls_posture,
    "net.credential-check": _run_credential_check,
}


def bundled_registry() -> ExecutorRegistry:
    """Registry with the four bundled network probe executors."""
    registry = ExecutorRegistry()
    for descriptor in bundled_descriptors():
        registry.register(descriptor, _BEHAVIORS[descriptor.capability])
    return registry
