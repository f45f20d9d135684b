"""ATNS1 tensor container.

Layout (little-endian): magic ``ATNS1``, u32 tensor count, then per tensor a
u16 name length, the UTF-8 name, u8 rank, rank x u32 dims and the f32
payload. Free-form metadata travels as a rank-1 tensor named ``__meta__``
holding UTF-8 JSON bytes.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import FormatError, MissingInput

MAGIC = b"ATNS1"
META = "__meta__"


def atns_bytes(tensors: dict, meta: dict | None = None) -> bytes:
    items = list(tensors.items())
    if meta is not None:
        items.append((META, np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)))
    out = [MAGIC, struct.pack("<I", len(items))]
    for name, arr in items:
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def parse_atns(buf: bytes):
    """Return ``(tensors, meta)``; tensors come back as float32 arrays."""
    if buf[:5] != MAGIC:
        raise FormatError("not an ATNS1 file")
    try:
        (count,) = struct.unpack_from("<I", buf, 5)
        pos = 9
        tensors, meta = {}, None
        for _ in range(count):
            (n,) = struct.unpack_from("<H", buf, pos)
            name = buf[pos + 2:pos + 2 + n].decode("utf-8")
            pos += 2 + n
            (rank,) = struct.unpack_from("<B", buf, pos)
            dims = struct.unpack_from(f"<{rank}I", buf, pos + 1)
            pos += 1 + 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * size > len(buf):
                raise FormatError(f"tensor {name!r} is truncated")
            arr = np.frombuffer(buf, dtype="<f4", count=size, offset=pos).reshape(dims).astype(np.float32)
            pos += 4 * size
            if name == META:
                meta = json.loads(arr.astype(np.uint8).tobytes().decode("utf-8"))
            else:
                tensors[name] = arr
    except struct.error as exc:
        raise FormatError(f"truncated ATNS1 file: {exc}") from exc
    if pos != len(buf):
        raise FormatError("trailing bytes after last tensor")
    return tensors, meta


def save_checkpoint(path, tensors: dict, meta: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(atns_bytes(tensors, meta))


def load_checkpoint(path):
    if not os.path.exists(path):
        raise MissingInput(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        return parse_atns(fh.read())
