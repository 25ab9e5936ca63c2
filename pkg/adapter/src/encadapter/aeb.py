"""Embedding interchange binary (AEB1), written atomically.

Layout (little-endian): magic "AEB1", u32 version = 1, u32 dim, u64 count,
then per record u16 id-length, id bytes (UTF-8), dim x f32; records sorted
by id. This matches the consumer's reader byte for byte.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

MAGIC = b"AEB1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<IIQ")


def write_embeddings(path, dim: int, vectors: dict[str, np.ndarray]) -> None:
    path = os.fspath(path)
    for item_id, vec in vectors.items():
        if np.asarray(vec).shape != (dim,):
            raise FormatError(
                f"embedding for {item_id!r} has shape {np.asarray(vec).shape}, expected ({dim},)"
            )
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".aeb.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_HEADER.pack(FORMAT_VERSION, dim, len(vectors)))
            for item_id in sorted(vectors):
                id_bytes = item_id.encode("utf-8")
                if len(id_bytes) > 0xFFFF:
                    raise FormatError(f"id too long: {item_id[:40]!r}...")
                fh.write(struct.pack("<H", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(np.ascontiguousarray(vectors[item_id], dtype="<f4").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_index(path) -> tuple[int, list[str]]:
    """Return (dim, ids) without keeping vectors; errors cite byte offsets."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head != MAGIC:
            raise FormatError(f"{path}: bad magic {head!r} at byte 0, expected {MAGIC!r}")
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise FormatError(f"{path}: header truncated at byte {4 + len(raw)}")
        version, dim, count = _HEADER.unpack(raw)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version} at byte 4")
        if dim == 0:
            raise FormatError(f"{path}: zero dim at byte 8")
        offset = 4 + _HEADER.size
        ids = []
        for _ in range(count):
            raw = fh.read(2)
            if len(raw) != 2:
                raise FormatError(f"{path}: record truncated at byte {offset}")
            (id_len,) = struct.unpack("<H", raw)
            offset += 2
            id_bytes = fh.read(id_len)
            if len(id_bytes) != id_len:
                raise FormatError(f"{path}: id truncated at byte {offset}")
            offset += id_len
            ids.append(id_bytes.decode("utf-8"))
            skipped = len(fh.read(4 * dim))
            if skipped != 4 * dim:
                raise FormatError(f"{path}: vector truncated at byte {offset + skipped}")
            offset += 4 * dim
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes at byte {offset}")
    return dim, ids
