"""Canonical machine-readable document format shared by every pipeline artifact.

One document per file: UTF-8 JSON with a required top-level ``kind`` and
``schema-version: "1"``. Field names are lower-kebab-case. Serialization is
canonical: keys in defined order, two-space indent, trailing newline, so that
``serialize(parse(doc)) == doc`` byte-for-byte and re-serialization is stable.

Parsing is strict: unknown fields, missing fields, ill-typed values, and
out-of-vocabulary tokens are rejected with a path-qualified error.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Callable

SCHEMA_VERSION = "1"


class DocumentError(Exception):
    """Base for document parse/validation failures."""

    code = "DOCUMENT"

    def __init__(self, message: str, *, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class DocumentSyntaxError(DocumentError):
    """The byte sequence is not a well-formed JSON document."""

    code = "SYNTAX"


class DocumentSchemaError(DocumentError):
    """A field is missing, unknown, ill-typed, or outside a closed vocabulary."""

    code = "SCHEMA"


class DocumentInvariantError(DocumentError):
    """The document is well-formed but violates a structural invariant."""

    code = "INVARIANT"


@dataclass(frozen=True)
class Codec:
    kind: str
    type: type
    to_payload: Callable[[Any], dict]
    from_payload: Callable[["Reader"], Any]


_CODECS_BY_KIND: dict[str, Codec] = {}
_CODECS_BY_TYPE: dict[type, Codec] = {}


def register_codec(kind: str, type_: type, to_payload, from_payload) -> None:
    codec = Codec(kind, type_, to_payload, from_payload)
    _CODECS_BY_KIND[kind] = codec
    _CODECS_BY_TYPE[type_] = codec


def registered_kinds() -> list[str]:
    return sorted(_CODECS_BY_KIND)


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


class Reader:
    """Strict field-by-field reader over one JSON object.

    Every declared field is consumed with a type check; ``finish()`` rejects
    whatever is left, so unknown fields surface as SCHEMA errors with a path.
    """

    def __init__(self, obj: Any, path: str = ""):
        if not isinstance(obj, dict):
            raise DocumentSchemaError(
                f"expected object, got {_type_name(obj)}", path=path or "<root>"
            )
        self._obj = dict(obj)
        self.path = path

    def _take(self, name: str, *, optional: bool = False):
        if name not in self._obj:
            if optional:
                return None
            raise DocumentSchemaError("missing field", path=_join(self.path, name))
        return self._obj.pop(name)

    def has(self, name: str) -> bool:
        return name in self._obj

    def str_field(self, name: str, *, optional: bool = False, default: str | None = None) -> str:
        value = self._take(name, optional=optional)
        if value is None:
            return default  # type: ignore[return-value]
        if not isinstance(value, str):
            raise DocumentSchemaError(
                f"expected text, got {_type_name(value)}", path=_join(self.path, name)
            )
        return value

    def int_field(self, name: str) -> int:
        value = self._take(name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise DocumentSchemaError(
                f"expected integer, got {_type_name(value)}", path=_join(self.path, name)
            )
        return value

    def bool_field(self, name: str) -> bool:
        value = self._take(name)
        if not isinstance(value, bool):
            raise DocumentSchemaError(
                f"expected boolean, got {_type_name(value)}", path=_join(self.path, name)
            )
        return value

    def token_field(self, name: str, vocabulary, *, optional: bool = False):
        """A string drawn from a closed vocabulary (an Enum class or a set)."""
        value = self._take(name, optional=optional)
        if value is None:
            return None
        if not isinstance(value, str):
            raise DocumentSchemaError(
                f"expected text, got {_type_name(value)}", path=_join(self.path, name)
            )
        if isinstance(vocabulary, type) and issubclass(vocabulary, enum.Enum):
            try:
                return vocabulary[value]
            except KeyError:
                allowed = ", ".join(m.name for m in vocabulary)
                raise DocumentSchemaError(
                    f"unknown token {value!r}, expected one of: {allowed}",
                    path=_join(self.path, name),
                ) from None
        if value not in vocabulary:
            allowed = ", ".join(sorted(vocabulary))
            raise DocumentSchemaError(
                f"unknown token {value!r}, expected one of: {allowed}",
                path=_join(self.path, name),
            )
        return value

    def list_field(self, name: str, *, optional: bool = False) -> list | None:
        value = self._take(name, optional=optional)
        if value is None:
            return None
        if not isinstance(value, list):
            raise DocumentSchemaError(
                f"expected list, got {_type_name(value)}", path=_join(self.path, name)
            )
        return value

    def map_field(self, name: str, *, optional: bool = False) -> dict | None:
        value = self._take(name, optional=optional)
        if value is None:
            return None
        if not isinstance(value, dict):
            raise DocumentSchemaError(
                f"expected object, got {_type_name(value)}", path=_join(self.path, name)
            )
        return value

    def object_field(self, name: str, *, optional: bool = False) -> "Reader | None":
        value = self._take(name, optional=optional)
        if value is None:
            return None
        return Reader(value, path=_join(self.path, name))

    def raw_field(self, name: str, *, optional: bool = False):
        return self._take(name, optional=optional)

    def child(self, value: Any, path: str) -> "Reader":
        return Reader(value, path=path)

    def timestamp_field(self, name: str) -> str:
        value = self.str_field(name)
        try:
            datetime.fromisoformat(value)
        except ValueError:
            raise DocumentSchemaError(
                f"expected ISO-8601 timestamp, got {value!r}", path=_join(self.path, name)
            ) from None
        return value

    def finish(self) -> None:
        if self._obj:
            name = sorted(self._obj)[0]
            raise DocumentSchemaError("unknown field", path=_join(self.path, name))


def _type_name(value: Any) -> str:
    if value is None:
        return "null"
    return {bool: "boolean", int: "integer", float: "number", str: "text",
            list: "list", dict: "object"}.get(type(value), type(value).__name__)


def scalar_value(value: Any, path: str):
    """An attribute value: text, integer, or boolean."""
    if isinstance(value, (str, bool)):
        return value
    if isinstance(value, int):
        return value
    raise DocumentSchemaError(
        f"expected text, integer, or boolean, got {_type_name(value)}", path=path
    )


def text_map(reader: Reader, name: str, *, optional: bool = False) -> dict[str, str]:
    """A free key -> text map (e.g. device metadata)."""
    raw = reader.map_field(name, optional=optional)
    if raw is None:
        return {}
    out: dict[str, str] = {}
    for key in sorted(raw):
        value = raw[key]
        if not isinstance(value, str):
            raise DocumentSchemaError(
                f"expected text, got {_type_name(value)}",
                path=_join(_join(reader.path, name), key),
            )
        out[key] = value
    return out


def parse_document(data: bytes | str, expected_kind: str | None = None):
    """Parse and fully validate one canonical document.

    ``expected_kind`` constrains the ``kind`` field; pass ``None`` to accept
    any registered kind. Raises ``DocumentSyntaxError`` on malformed input,
    ``DocumentSchemaError`` on shape violations, ``DocumentInvariantError``
    on structural invariant violations.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentSyntaxError(f"not valid UTF-8: {exc}") from None
    else:
        text = data
    if not text.strip():
        raise DocumentSyntaxError("empty document")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"malformed JSON: {exc}") from None

    reader = Reader(obj)
    kind = reader.str_field("kind")
    if expected_kind is not None and kind != expected_kind:
        raise DocumentSchemaError(
            f"expected kind {expected_kind!r}, got {kind!r}", path="kind"
        )
    codec = _CODECS_BY_KIND.get(kind)
    if codec is None:
        allowed = ", ".join(registered_kinds())
        raise DocumentSchemaError(
            f"unknown kind {kind!r}, expected one of: {allowed}", path="kind"
        )
    version = reader.str_field("schema-version")
    if version != SCHEMA_VERSION:
        raise DocumentSchemaError(
            f"unsupported schema-version {version!r}, expected {SCHEMA_VERSION!r}",
            path="schema-version",
        )
    return codec.from_payload(reader)


def document_object(value: Any) -> dict:
    """The ordered plain-dict form of a value, including the envelope fields."""
    codec = _CODECS_BY_TYPE.get(type(value))
    if codec is None:
        raise TypeError(f"no document codec registered for {type(value).__name__}")
    out: dict[str, Any] = {"kind": codec.kind, "schema-version": SCHEMA_VERSION}
    out.update(codec.to_payload(value))
    return out


def serialize_document(value: Any) -> bytes:
    """Canonical UTF-8 bytes for a valid value; inverse of ``parse_document``."""
    return (json.dumps(document_object(value), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def kind_of(value: Any) -> str:
    codec = _CODECS_BY_TYPE.get(type(value))
    if codec is None:
        raise TypeError(f"no document codec registered for {type(value).__name__}")
    return codec.kind
