"""Binary checkpoint format.

Layout (little-endian)::

    b"SLTC" | u32 version=1 | u32 tensor count
    per tensor: u16 name length | UTF-8 name | u8 ndim | ndim x u32 dims | f32 payload
    u64 FNV-1a hash of every preceding byte

Non-tensor metadata (model kind, hyperparameters) lives in a JSON sidecar
next to the checkpoint, ``<path>.meta.json``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import CorruptCheckpointError

MAGIC = b"SLTC"
VERSION = 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def encode(params: dict) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, value in params.items():
        array = np.ascontiguousarray(value if isinstance(value, np.ndarray) else value.data, dtype="<f4")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:40]}...")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(array.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<Q", fnv1a64(body))


def decode(blob: bytes) -> dict:
    offset = 0

    def take(size, what):
        nonlocal offset
        if offset + size > len(blob):
            raise CorruptCheckpointError(f"truncated while reading {what}", offset)
        chunk = blob[offset : offset + size]
        offset += size
        return chunk

    if take(4, "magic") != MAGIC:
        raise CorruptCheckpointError("bad magic bytes", 0)
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise CorruptCheckpointError(f"unsupported version {version}", 4)
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        start = offset
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptCheckpointError("tensor name is not valid UTF-8", start) from None
        (ndim,) = struct.unpack("<B", take(1, "ndim"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, "dims"))
        size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        payload = take(4 * size, f"payload of {name!r}")
        params[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    end = offset
    (stored,) = struct.unpack("<Q", take(8, "checksum"))
    if offset != len(blob):
        raise CorruptCheckpointError(f"{len(blob) - offset} unexpected trailing bytes", offset)
    if fnv1a64(blob[:end]) != stored:
        raise CorruptCheckpointError("checksum mismatch", end)
    return params


def save_checkpoint(params: dict, meta: dict | None, path) -> Path:
    """Write tensors (and ``meta`` to the JSON sidecar when given)."""
    path = Path(path)
    path.write_bytes(encode(params))
    if meta is not None:
        meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path):
    """Return ``(params, meta)``; ``meta`` is None when no sidecar exists."""
    path = Path(path)
    params = decode(path.read_bytes())
    sidecar = meta_path(path)
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else None
    return params, meta
