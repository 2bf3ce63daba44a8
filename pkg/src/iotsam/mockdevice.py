"""Configurable loopback mock of an IoT device's network surface.

Lets the whole pipeline run against real sockets without a physical device:
telnet-style login services with configurable banners and accepted
credentials, TLS endpoints with selectable protocol versions and certificate
properties, HTTP basic-auth services, and silent TCP listeners. Configured
through a ``mock-device`` document; port 0 binds an ephemeral port.
"""

from __future__ import annotations

import datetime
import socket
import ssl
import tempfile
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path

from .documents import DocumentInvariantError, Reader, register_codec

_PROTOCOLS = frozenset({"telnet", "tls", "http-basic", "tcp-banner", "tcp-silent"})
_CERTIFICATES = frozenset({"self-signed", "ca-signed"})


@dataclass(frozen=True)
class MockService:
    service_id: str
    protocol: str
    port: int = 0
    banner: str = ""
    accepted_credentials: tuple[tuple[str, str], ...] = ()
    tls_versions: tuple[str, ...] = ()
    certificate: str = "self-signed"
    certificate_expired: bool = False


@dataclass(frozen=True)
class MockDeviceConfig:
    mock_id: str
    services: tuple[MockService, ...]


def _service_payload(service: MockService) -> dict:
    out: dict = {
        "service-id": service.service_id,
        "protocol": service.protocol,
        "port": service.port,
    }
    if service.banner:
        out["banner"] = service.banner
    if service.accepted_credentials:
        out["accepted-credentials"] = [
            {"username": u, "password": p} for u, p in service.accepted_credentials
        ]
    if service.protocol == "tls":
        out["tls-versions"] = list(service.tls_versions)
        out["certificate"] = service.certificate
        out["certificate-expired"] = service.certificate_expired
    return out


def _service_from(reader: Reader) -> MockService:
    service_id = reader.str_field("service-id")
    protocol = reader.token_field("protocol", _PROTOCOLS)
    port = reader.int_field("port")
    banner = reader.str_field("banner", optional=True, default="")
    raw_creds = reader.list_field("accepted-credentials", optional=True) or []
    credentials = []
    for i, item in enumerate(raw_creds):
        child = reader.child(item, f"{reader.path}.accepted-credentials[{i}]")
        credentials.append((child.str_field("username"), child.str_field("password")))
        child.finish()
    tls_versions: tuple[str, ...] = ()
    certificate = "self-signed"
    certificate_expired = False
    if protocol == "tls":
        raw_versions = reader.list_field("tls-versions")
        for i, v in enumerate(raw_versions):
            child = reader.child({"v": v}, f"{reader.path}.tls-versions[{i}]")
            child.token_field("v", {"tls1.0", "tls1.1", "tls1.2", "tls1.3"})
        tls_versions = tuple(raw_versions)
        certificate = reader.token_field("certificate", _CERTIFICATES)
        certificate_expired = reader.bool_field("certificate-expired")
    reader.finish()
    if not 0 <= port <= 65535:
        raise DocumentInvariantError(
            f"service {service_id!r} port {port} outside 0-65535",
            path=f"{reader.path}.port",
        )
    if protocol == "tls":
        if not tls_versions:
            raise DocumentInvariantError(
                f"tls service {service_id!r} must offer at least one version",
                path=f"{reader.path}.tls-versions",
            )
        order = ["tls1.0", "tls1.1", "tls1.2", "tls1.3"]
        indices = sorted(order.index(v) for v in set(tls_versions))
        if indices != list(range(indices[0], indices[-1] + 1)):
            # the listener enables a min..max range, so holes are unservable
            raise DocumentInvariantError(
                f"tls service {service_id!r} versions must form a contiguous range",
                path=f"{reader.path}.tls-versions",
            )
    return MockService(service_id, protocol, port, banner, tuple(credentials),
                       tls_versions, certificate, certificate_expired)


def _config_payload(config: MockDeviceConfig) -> dict:
    return {
        "mock-id": config.mock_id,
        "services": [_service_payload(s) for s in config.services],
    }


def _config_from(reader: Reader) -> MockDeviceConfig:
    mock_id = reader.str_field("mock-id")
    raw = reader.list_field("services")
    services = tuple(
        _service_from(reader.child(item, f"services[{i}]")) for i, item in enumerate(raw)
    )
    reader.finish()
    seen: set[str] = set()
    for i, service in enumerate(services):
        if service.service_id in seen:
            raise DocumentInvariantError(
                f"duplicate service-id {service.service_id!r}",
                path=f"services[{i}].service-id",
            )
        seen.add(service.service_id)
    return MockDeviceConfig(mock_id, services)


register_codec("mock-device", MockDeviceConfig, _config_payload, _config_from)


# ---------------------------------------------------------------------------
# Certificates

_TLS_VERSION_MAP = {
    "tls1.0": ssl.TLSVersion.TLSv1,
    "tls1.1": ssl.TLSVersion.TLSv1_1,
    "tls1.2": ssl.TLSVersion.TLSv1_2,
    "tls1.3": ssl.TLSVersion.TLSv1_3,
}


def _make_cert_bundle(kind: str, expired: bool) -> str:
    """Write a PEM bundle (leaf cert + key) to a temp file, return its path."""
    from cryptography import x509
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import rsa
    from cryptography.x509.oid import NameOID

    now = datetime.datetime.now(datetime.timezone.utc)
    not_before = now - datetime.timedelta(days=365)
    not_after = now - datetime.timedelta(days=30) if expired else now + datetime.timedelta(days=365)

    leaf_key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    leaf_name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "mock-device.local")])

    if kind == "self-signed":
        issuer_name, signing_key = leaf_name, leaf_key
    else:
        ca_key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
        issuer_name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "mock test CA")])
        signing_key = ca_key

    cert = (
        x509.CertificateBuilder()
        .subject_name(leaf_name)
        .issuer_name(issuer_name)
        .public_key(leaf_key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(not_before)
        .not_valid_after(not_after)
        .sign(signing_key, hashes.SHA256())
    )
    pem = cert.public_bytes(serialization.Encoding.PEM) + leaf_key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.TraditionalOpenSSL,
        serialization.NoEncryption(),
    )
    with tempfile.NamedTemporaryFile(delete=False, suffix=".pem") as handle:
        handle.write(pem)
        return handle.name


# ---------------------------------------------------------------------------
# Service handlers


def _recv_line(conn: socket.socket, timeout: float = 5.0) -> str:
    conn.settimeout(timeout)
    buffer = b""
    while b"\n" not in buffer and len(buffer) < 512:
        try:
            chunk = conn.recv(128)
        except (socket.timeout, OSError):
            break
        if not chunk:
            break
        buffer += chunk
    return buffer.decode("utf-8", errors="replace").strip()


def _handle_telnet(service: MockService, conn: socket.socket) -> None:
    greeting = f"{service.banner}\r\nlogin: " if service.banner else "login: "
    conn.sendall(greeting.encode("utf-8"))
    username = _recv_line(conn)
    conn.sendall(b"Password: ")
    password = _recv_line(conn)
    if (username, password) in service.accepted_credentials:
        conn.sendall(b"Welcome\r\n# ")
    else:
        conn.sendall(b"Login incorrect\r\n")


def _handle_http_basic(service: MockService, conn: socket.socket) -> None:
    conn.settimeout(5.0)
    buffer = b""
    while b"\r\n\r\n" not in buffer and len(buffer) < 8192:
        try:
            chunk = conn.recv(1024)
        except (socket.timeout, OSError):
            break
        if not chunk:
            break
        buffer += chunk
    import base64 as b64

    authorized = False
    for line in buffer.split(b"\r\n"):
        if line.lower().startswith(b"authorization: basic "):
            token = line.split(b" ", 2)[2].strip()
            try:
                username, _, password = b64.b64decode(token).decode("utf-8").partition(":")
            except Exception:
                break
            authorized = (username, password) in service.accepted_credentials
            break
    if authorized:
        body = b"ok"
        head = b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\n"
    else:
        body = b""
        head = (b"HTTP/1.1 401 Unauthorized\r\n"
                b"WWW-Authenticate: Basic realm=\"mock\"\r\nContent-Length: 0\r\n\r\n")
    conn.sendall(head + body)


def _handle_tcp_banner(service: MockService, conn: socket.socket) -> None:
    if service.banner:
        conn.sendall(f"{service.banner}\r\n".encode("utf-8"))
    _recv_line(conn, timeout=2.0)


def _handle_tcp_silent(service: MockService, conn: socket.socket) -> None:
    _recv_line(conn, timeout=2.0)


class _TlsHandler:
    def __init__(self, service: MockService):
        self._bundle = _make_cert_bundle(service.certificate, service.certificate_expired)
        versions = [_TLS_VERSION_MAP[v] for v in service.tls_versions]
        self._context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        self._context.load_cert_chain(self._bundle)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DeprecationWarning)
            self._context.minimum_version = min(versions)
            self._context.maximum_version = max(versions)
        self._context.set_ciphers("ALL:@SECLEVEL=0")

    def __call__(self, service: MockService, conn: socket.socket) -> None:
        try:
            tls = self._context.wrap_socket(conn, server_side=True)
        except (ssl.SSLError, OSError):
            return
        try:
            tls.settimeout(2.0)
            tls.recv(256)
        except (socket.timeout, OSError, ssl.SSLError):
            pass
        finally:
            try:
                tls.close()
            except (OSError, ssl.SSLError):
                pass

    def cleanup(self) -> None:
        Path(self._bundle).unlink(missing_ok=True)


class MockDevice:
    """Runs the configured services on loopback listeners until stopped."""

    def __init__(self, config: MockDeviceConfig, host: str = "127.0.0.1"):
        self.config = config
        self.host = host
        self.ports: dict[str, int] = {}
        self._listeners: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._tls_handlers: list[_TlsHandler] = []
        self._stopping = threading.Event()

    def __enter__(self) -> "MockDevice":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def start(self) -> None:
        for service in self.config.services:
            handler = self._handler_for(service)
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind((self.host, service.port))
            listener.listen(16)
            self.ports[service.service_id] = listener.getsockname()[1]
            self._listeners.append(listener)
            thread = threading.Thread(
                target=self._serve, args=(listener, service, handler),
                name=f"mock-{service.service_id}", daemon=True,
            )
            thread.start()
            self._threads.append(thread)

    def _handler_for(self, service: MockService):
        if service.protocol == "telnet":
            return _handle_telnet
        if service.protocol == "http-basic":
            return _handle_http_basic
        if service.protocol == "tcp-banner":
            return _handle_tcp_banner
        if service.protocol == "tcp-silent":
            return _handle_tcp_silent
        handler = _TlsHandler(service)
        self._tls_handlers.append(handler)
        return handler

    def _serve(self, listener: socket.socket, service: MockService, handler) -> None:
        listener.settimeout(0.25)  # closing a socket does not wake accept() everywhere
        while not self._stopping.is_set():
            try:
                conn, _ = listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(5.0)
            worker = threading.Thread(
                target=self._handle_connection, args=(handler, service, conn), daemon=True
            )
            worker.start()

    @staticmethod
    def _handle_connection(handler, service: MockService, conn: socket.socket) -> None:
        try:
            handler(service, conn)
        except (OSError, ssl.SSLError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def stop(self) -> None:
        self._stopping.set()
        for listener in self._listeners:
            try:
                listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                listener.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=2.0)
        for handler in self._tls_handlers:
            handler.cleanup()
        self._listeners.clear()
        self._threads.clear()
