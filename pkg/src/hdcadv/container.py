"""Self-describing binary container for packed hypervector tables.

Layout (all integers little-endian)::

    offset  size  field
    0       8     magic (identifies the payload kind)
    8       1     format version (currently 1)
    9       3     reserved, zero
    12      4     dimension D (u32)
    16      4     number of hypervectors n (u32)
    20      8     seed (u64)
    28      4     metadata length m (u32)
    32      m     metadata, UTF-8 JSON object
    32+m    n*W*8 payload: n rows of W = ceil(D/64) u64 words, bit i of the row
                  is element i (1 for +1, 0 for -1), padding bits zero
    end     4     CRC-32 of every preceding byte

Readers reject a wrong magic, unknown version, truncated or oversized files
and checksum mismatches, always reporting the byte offset involved.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .hdc import n_words

VERSION = 1
_HEADER = struct.Struct("<8sB3xIIQI")


class ContainerError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def write_container(path, magic: bytes, dim: int, rows: np.ndarray, seed: int, meta: dict):
    rows = np.ascontiguousarray(rows, dtype="<u8")
    if rows.ndim != 2 or rows.shape[1] != n_words(dim):
        raise ValueError(f"rows must have shape (n, {n_words(dim)})")
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    body = _HEADER.pack(magic, VERSION, dim, rows.shape[0], seed, len(meta_bytes)) + meta_bytes + rows.tobytes()
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def read_container(path, magic: bytes):
    """Return ``(dim, rows, seed, meta)``; raise :class:`ContainerError` on any defect."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ContainerError(f"truncated header: {len(data)} of {_HEADER.size} bytes", len(data))
    got_magic, version, dim, n, seed, meta_len = _HEADER.unpack_from(data)
    if got_magic != magic:
        raise ContainerError(f"bad magic {got_magic!r}, expected {magic!r}", 0)
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}", 8)
    if dim < 1:
        raise ContainerError("dimension must be positive", 12)
    meta_end = _HEADER.size + meta_len
    payload_end = meta_end + n * n_words(dim) * 8
    if len(data) < payload_end + 4:
        raise ContainerError(f"truncated payload: expected {payload_end + 4} bytes, file has {len(data)}", len(data))
    if len(data) > payload_end + 4:
        raise ContainerError(f"payload length disagrees with header: {len(data) - payload_end - 4} extra bytes", payload_end + 4)
    (crc,) = struct.unpack_from("<I", data, payload_end)
    if crc != zlib.crc32(data[:payload_end]):
        raise ContainerError("checksum mismatch", payload_end)
    try:
        meta = json.loads(data[_HEADER.size:meta_end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"bad metadata: {exc}", _HEADER.size) from None
    rows = np.frombuffer(data, dtype="<u8", count=n * n_words(dim), offset=meta_end).reshape(n, n_words(dim))
    tail = dim % 64
    if tail and n and np.any(rows[:, -1] >> np.uint64(tail)):
        raise ContainerError("nonzero padding bits", meta_end)
    return dim, rows.astype(np.uint64), seed, meta
