"""Canonical byte and JSON encodings.

Byte layout (used for everything that gets hashed or signed)::

    None   -> b"N"
    bool   -> b"T" | b"F"
    int    -> b"I" + 8-byte signed big-endian
    bytes  -> b"B" + 4-byte big-endian length + data
    str    -> b"S" + 4-byte big-endian length + UTF-8 data
    list   -> b"L" + 4-byte count + items
    dict   -> b"D" + 4-byte count + (key, value) pairs, keys sorted bytewise

Group elements and scalars never go through the ``int`` path; callers
convert them to fixed-width bytes first (see ``GroupParams.element_bytes``).
"""

from __future__ import annotations

import base64
import json
import struct
from typing import Any

_LEN = struct.Struct(">I")
_INT = struct.Struct(">q")


def canonical_bytes(obj: Any) -> bytes:
    out = bytearray()
    _encode(obj, out)
    return bytes(out)


def _encode(obj: Any, out: bytearray) -> None:
    if obj is None:
        out += b"N"
    elif obj is True:
        out += b"T"
    elif obj is False:
        out += b"F"
    elif isinstance(obj, int):
        try:
            out += b"I" + _INT.pack(obj)
        except struct.error as exc:
            raise ValueError(f"integer {obj} exceeds 64-bit canonical range") from exc
    elif isinstance(obj, (bytes, bytearray, memoryview)):
        data = bytes(obj)
        out += b"B" + _LEN.pack(len(data)) + data
    elif isinstance(obj, str):
        data = obj.encode("utf-8")
        out += b"S" + _LEN.pack(len(data)) + data
    elif isinstance(obj, (list, tuple)):
        out += b"L" + _LEN.pack(len(obj))
        for item in obj:
            _encode(item, out)
    elif isinstance(obj, dict):
        keys = []
        for key in obj:
            if not isinstance(key, str):
                raise TypeError(f"canonical map keys must be str, got {type(key).__name__}")
            keys.append((key.encode("utf-8"), key))
        keys.sort()
        out += b"D" + _LEN.pack(len(keys))
        for raw, key in keys:
            out += b"S" + _LEN.pack(len(raw)) + raw
            _encode(obj[key], out)
    else:
        raise TypeError(f"cannot canonically encode {type(obj).__name__}")


def decode_canonical(data: bytes) -> Any:
    """Inverse of :func:`canonical_bytes`; raises ValueError on any malformation."""
    value, pos = _decode(data, 0)
    if pos != len(data):
        raise ValueError("trailing bytes after canonical value")
    return value


def _take(data: bytes, pos: int, n: int) -> tuple[bytes, int]:
    if pos + n > len(data):
        raise ValueError("truncated canonical encoding")
    return data[pos : pos + n], pos + n


def _decode(data: bytes, pos: int) -> tuple[Any, int]:
    tag, pos = _take(data, pos, 1)
    if tag == b"N":
        return None, pos
    if tag == b"T":
        return True, pos
    if tag == b"F":
        return False, pos
    if tag == b"I":
        raw, pos = _take(data, pos, 8)
        return _INT.unpack(raw)[0], pos
    if tag in (b"B", b"S"):
        raw, pos = _take(data, pos, 4)
        body, pos = _take(data, pos, _LEN.unpack(raw)[0])
        return (body if tag == b"B" else body.decode("utf-8")), pos
    if tag == b"L":
        raw, pos = _take(data, pos, 4)
        items = []
        for _ in range(_LEN.unpack(raw)[0]):
            item, pos = _decode(data, pos)
            items.append(item)
        return items, pos
    if tag == b"D":
        raw, pos = _take(data, pos, 4)
        result: dict[str, Any] = {}
        prev = None
        for _ in range(_LEN.unpack(raw)[0]):
            key, pos = _decode(data, pos)
            if not isinstance(key, str):
                raise ValueError("non-string map key")
            kb = key.encode("utf-8")
            if prev is not None and kb <= prev:
                raise ValueError("map keys not in canonical order")
            prev = kb
            result[key], pos = _decode(data, pos)
        return result, pos
    raise ValueError(f"unknown canonical tag {tag!r}")


def b64e(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64d(text: str) -> bytes:
    """Strict decode: only the one canonical spelling of each byte string is accepted."""
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    if b64e(raw) != text:
        raise ValueError("non-canonical base64")
    return raw


def canonical_json(obj: Any) -> str:
    """Sorted-key, whitespace-free JSON; stable across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
