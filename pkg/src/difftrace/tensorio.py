"""Binary tensor files: magic, JSON header, raw little-endian payload.

Layout: 4 magic bytes ``DXT1``, a 4-byte little-endian header length, the
UTF-8 JSON header ``{"dtype": "f32", "shape": [...], "order": "row-major"}``
(optionally carrying a ``meta`` object), then the row-major float32 payload.
Round-trips are bit-identical.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC = b"DXT1"


class TensorFormatError(ValueError):
    pass


def _pack(array: np.ndarray, meta: dict | None) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    header: dict = {
        "dtype": "f32",
        "shape": list(arr.shape),
        "order": "row-major",
    }
    if meta is not None:
        header["meta"] = meta
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + arr.tobytes()


def write_tensor(
    target: str | Path | BinaryIO, array: np.ndarray, meta: dict | None = None
) -> None:
    blob = _pack(array, meta)
    if isinstance(target, (str, Path)):
        Path(target).write_bytes(blob)
    else:
        target.write(blob)


def tensor_bytes(array: np.ndarray, meta: dict | None = None) -> bytes:
    return _pack(array, meta)


def _unpack(blob: bytes) -> tuple[np.ndarray, dict]:
    if blob[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 8:
        raise TensorFormatError("truncated file: missing header length")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header_end = 8 + header_len
    if len(blob) < header_end:
        raise TensorFormatError(
            f"truncated file: header says {header_len} bytes, {len(blob) - 8} available"
        )
    try:
        header = json.loads(blob[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"unreadable header: {exc}") from exc
    if header.get("dtype") != "f32" or header.get("order") != "row-major":
        raise TensorFormatError(f"unsupported header {header}")
    shape = tuple(header["shape"])
    if not all(isinstance(d, int) and d >= 0 for d in shape):
        raise TensorFormatError(f"invalid shape {shape}")
    count = math.prod(shape)
    payload = blob[header_end:]
    if len(payload) != 4 * count:
        raise TensorFormatError(
            f"payload is {len(payload)} bytes but shape {shape} needs {4 * count}"
        )
    array = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return array.astype(np.float32, copy=True), header


def read_tensor_with_header(source: str | Path | BinaryIO | bytes) -> tuple[np.ndarray, dict]:
    if isinstance(source, (str, Path)):
        blob = Path(source).read_bytes()
    elif isinstance(source, bytes):
        blob = source
    else:
        blob = source.read()
    return _unpack(blob)


def read_tensor(source: str | Path | BinaryIO | bytes) -> np.ndarray:
    return read_tensor_with_header(source)[0]
