"""Wire codecs for matrices: TEXT (JSON) and RAW (binary).

TEXT payloads are UTF-8 JSON arrays-of-arrays, one inner array per row, no
whitespace.  Numbers use the shortest decimal string that parses back to the
identical float64 (CPython ``repr`` semantics): positional notation for
|x| in [1e-4, 1e16), lowercase ``e`` scientific notation otherwise, ``.``
decimal point.  decode(encode(m)) is therefore bit-exact, including -0.0
and subnormals.  Non-finite values are rejected so output stays valid JSON.

RAW payloads are little-endian regardless of host:

    bytes 0-3    magic "ODM1"
    bytes 4-7    rows, uint32
    bytes 8-11   cols, uint32
    bytes 12-    rows*cols float64 values, row-major

giving exactly ``12 + 8 * rows * cols`` bytes.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, MalformedPayloadError
from .workloads import as_matrix

RAW_MAGIC = b"ODM1"
RAW_HEADER = struct.Struct("<4sII")
_MAX_DIM = 2**32 - 1


class CodecKind(enum.Enum):
    TEXT = "TEXT"
    RAW = "RAW"

    @property
    def content_type(self) -> str:
        return _CONTENT_TYPES[self]

    @classmethod
    def from_content_type(cls, content_type: str | None) -> "CodecKind | None":
        if content_type is None:
            return None
        # ignore any media-type parameters (e.g. charset)
        base = content_type.split(";", 1)[0].strip().lower()
        return _KINDS_BY_CONTENT_TYPE.get(base)

    @classmethod
    def for_label(cls, label: str) -> "CodecKind":
        """Map a codec label (e.g. ``TEXT-slow``) onto its wire format."""
        if label.startswith("TEXT"):
            return cls.TEXT
        if label.startswith("RAW"):
            return cls.RAW
        raise InvalidArgumentError(
            f"codec label {label!r} must start with 'TEXT' or 'RAW'"
        )


_CONTENT_TYPES = {
    CodecKind.TEXT: "application/json",
    CodecKind.RAW: "application/octet-stream",
}
_KINDS_BY_CONTENT_TYPE = {v: k for k, v in _CONTENT_TYPES.items()}


@dataclass(frozen=True)
class Payload:
    """Encoded matrix bytes tagged with the codec that produced them."""

    kind: CodecKind
    data: bytes

    @property
    def nbytes(self) -> int:
        return len(self.data)


def encode(kind: CodecKind, m: np.ndarray) -> Payload:
    m = as_matrix(m)
    if kind == CodecKind.TEXT:
        try:
            text = json.dumps(m.tolist(), separators=(",", ":"), allow_nan=False)
        except ValueError:
            raise InvalidArgumentError(
                "TEXT codec cannot represent non-finite values"
            ) from None
        return Payload(kind, text.encode("ascii"))
    if kind == CodecKind.RAW:
        rows, cols = m.shape
        if rows > _MAX_DIM or cols > _MAX_DIM:
            raise InvalidArgumentError(
                f"RAW dimensions must fit in uint32, got {rows}x{cols}"
            )
        header = RAW_HEADER.pack(RAW_MAGIC, rows, cols)
        return Payload(kind, header + m.astype("<f8", copy=False).tobytes(order="C"))
    raise InvalidArgumentError(f"unknown codec {kind!r}")


def decode(kind: CodecKind, data: bytes) -> np.ndarray:
    if kind == CodecKind.TEXT:
        return _decode_text(data)
    if kind == CodecKind.RAW:
        return _decode_raw(data)
    raise InvalidArgumentError(f"unknown codec {kind!r}")


def _decode_raw(data: bytes) -> np.ndarray:
    if len(data) < RAW_HEADER.size:
        raise MalformedPayloadError(
            f"RAW payload truncated: {len(data)} bytes, header needs {RAW_HEADER.size}"
        )
    magic, rows, cols = RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise MalformedPayloadError(f"bad RAW magic {magic!r}")
    if rows == 0 or cols == 0:
        raise MalformedPayloadError(f"RAW dimensions must be positive, got {rows}x{cols}")
    expected = RAW_HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise MalformedPayloadError(
            f"RAW length mismatch: got {len(data)} bytes, {rows}x{cols} needs {expected}"
        )
    flat = np.frombuffer(data, dtype="<f8", offset=RAW_HEADER.size)
    return flat.astype(np.float64).reshape(rows, cols)


def _reject_constant(token: str):
    raise MalformedPayloadError(f"non-finite JSON token {token!r}")


def _decode_text(data: bytes) -> np.ndarray:
    try:
        obj = json.loads(data.decode("utf-8"), parse_constant=_reject_constant)
    except MalformedPayloadError:
        raise
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedPayloadError(f"TEXT parse failure: {exc}") from None
    if not isinstance(obj, list) or not obj:
        raise MalformedPayloadError("TEXT payload must be a non-empty array of rows")
    width = None
    rows = []
    for i, row in enumerate(obj):
        if not isinstance(row, list) or not row:
            raise MalformedPayloadError(f"TEXT row {i} is not a non-empty array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MalformedPayloadError(
                f"TEXT rows are ragged: row {i} has {len(row)} elements, expected {width}"
            )
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise MalformedPayloadError(
                    f"TEXT element [{i}][{j}] is not a number"
                )
        try:
            rows.append([float(x) for x in row])
        except OverflowError:
            raise MalformedPayloadError(
                f"TEXT row {i} contains a number outside float64 range"
            ) from None
    out = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise MalformedPayloadError("TEXT payload contains a number outside float64 range")
    return out
