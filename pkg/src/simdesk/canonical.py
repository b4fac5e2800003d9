"""Canonical byte encoding and content hashing.

Every artifact this package persists or hashes (bundles, templates, commit
objects, traces, API bodies) goes through one encoder so that identical
values always produce identical bytes. The concrete syntax is a restricted
JSON: map keys sorted by UTF-8 byte order, no insignificant whitespace,
integers in shortest decimal, floats in shortest round-trip decimal,
strings minimally escaped. Reading is lenient (whitespace and key order
are accepted); writing is strict.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Union

CanonicalValue = Union[None, bool, int, float, str, list, dict]

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

# Error codes carried by CanonicalError.
NON_FINITE_FLOAT = "NON_FINITE_FLOAT"
DUPLICATE_KEY = "DUPLICATE_KEY"
SYNTAX_ERROR = "SYNTAX_ERROR"
UNSUPPORTED_TYPE = "UNSUPPORTED_TYPE"
INT_RANGE = "INT_RANGE"
BAD_KEY = "BAD_KEY"


class CanonicalError(ValueError):
    """Raised when a value cannot be canonically encoded or parsed."""

    def __init__(self, code: str, message: str, offset: int | None = None):
        self.code = code
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _write_string(s: str, out: list[str]) -> None:
    out.append('"')
    for ch in s:
        esc = _ESCAPES.get(ch)
        if esc is not None:
            out.append(esc)
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')


def _write_float(v: float, out: list[str]) -> None:
    if not math.isfinite(v):
        raise CanonicalError(NON_FINITE_FLOAT, f"non-finite float {v!r}")
    # repr() is the shortest decimal string that round-trips the IEEE-754
    # double; it always contains '.' or 'e', keeping floats distinct from ints.
    out.append(repr(v))


def _write(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        if not (INT_MIN <= value <= INT_MAX):
            raise CanonicalError(INT_RANGE, f"integer {value} outside 64-bit signed range")
        out.append(str(value))
    elif isinstance(value, float):
        _write_float(value, out)
    elif isinstance(value, str):
        _write_string(value, out)
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        seen: set[str] = set()
        keyed = []
        for k in value:
            if not isinstance(k, str):
                raise CanonicalError(BAD_KEY, f"map key {k!r} is not a string")
            keyed.append((k.encode("utf-8"), k))
        keyed.sort(key=lambda kb: kb[0])
        for i, (_, k) in enumerate(keyed):
            if k in seen:
                raise CanonicalError(DUPLICATE_KEY, f"duplicate map key {k!r}")
            seen.add(k)
            if i:
                out.append(",")
            _write_string(k, out)
            out.append(":")
            _write(value[k], out)
        out.append("}")
    else:
        raise CanonicalError(UNSUPPORTED_TYPE, f"unsupported type {type(value).__name__}")


def canonicalize(value: CanonicalValue) -> bytes:
    """Encode a value into its unique canonical byte form."""
    out: list[str] = []
    _write(value, out)
    return "".join(out).encode("utf-8")


def _reject_constant(token: str) -> Any:
    raise CanonicalError(NON_FINITE_FLOAT, f"non-finite literal {token}")


def _pairs_hook(pairs: list[tuple[str, Any]]) -> dict:
    d: dict[str, Any] = {}
    for k, v in pairs:
        if k in d:
            raise CanonicalError(DUPLICATE_KEY, f"duplicate map key {k!r}")
        d[k] = v
    return d


def _check_parsed(value: Any) -> None:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return
    if isinstance(value, int):
        if not (INT_MIN <= value <= INT_MAX):
            raise CanonicalError(INT_RANGE, f"integer {value} outside 64-bit signed range")
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise CanonicalError(NON_FINITE_FLOAT, f"number overflows to {value!r}")
    elif isinstance(value, list):
        for item in value:
            _check_parsed(item)
    elif isinstance(value, dict):
        for v in value.values():
            _check_parsed(v)


def parse_canonical(data: bytes | str) -> CanonicalValue:
    """Parse UTF-8 bytes into a value.

    Lenient on whitespace and key order; strict on duplicate keys,
    non-finite numbers, and out-of-range integers.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CanonicalError(SYNTAX_ERROR, "invalid UTF-8", offset=exc.start) from exc
    else:
        text = data
    try:
        value = json.loads(text, object_pairs_hook=_pairs_hook, parse_constant=_reject_constant)
    except CanonicalError:
        raise
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise CanonicalError(SYNTAX_ERROR, exc.msg, offset=byte_offset) from exc
    _check_parsed(value)
    return value


def content_hash(value: CanonicalValue) -> str:
    """SHA-256 of the canonical bytes, lowercase hex."""
    return hashlib.sha256(canonicalize(value)).hexdigest()


def canonical_equal(a: CanonicalValue, b: CanonicalValue) -> bool:
    """Type-strict equality: 1 != 1.0 != True, -0.0 != 0.0."""
    if type(a) is not type(b):
        return False
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(canonical_equal(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(canonical_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return math.copysign(1.0, a) == math.copysign(1.0, b) and a == b
    return a == b


def write_canonical_file(path: str | Path, value: CanonicalValue) -> None:
    """Write canonical bytes atomically (temp file + rename)."""
    path = Path(path)
    data = canonicalize(value)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_canonical_file(path: str | Path) -> CanonicalValue:
    return parse_canonical(Path(path).read_bytes())


def file_sha256(path: str | Path) -> str:
    """SHA-256 of a file's exact bytes, lowercase hex."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
