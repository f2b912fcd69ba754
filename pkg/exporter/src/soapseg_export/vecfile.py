"""Binary embedding-file writer/reader.

Wire format (little-endian): magic "SOAPVEC1", uint32 dimension, uint64
record count, uint16-prefixed UTF-8 comment, then per record a
uint16-prefixed UTF-8 key followed by dimension float32 values.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"SOAPVEC1"


class VecFileError(Exception):
    pass


def write_vecfile(entries: Sequence[tuple[str, np.ndarray]],
                  path: str | Path, comment: str = "") -> None:
    if not entries:
        raise VecFileError("refusing to write an empty embedding file")
    dim = int(np.asarray(entries[0][1]).reshape(-1).shape[0])
    seen: set[str] = set()
    comment_bytes = comment.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", dim))
        fh.write(struct.pack("<Q", len(entries)))
        fh.write(struct.pack("<H", len(comment_bytes)))
        fh.write(comment_bytes)
        for key, vec in entries:
            arr = np.asarray(vec, dtype=np.float32).reshape(-1)
            if arr.shape[0] != dim:
                raise VecFileError(f"{key!r}: dim {arr.shape[0]} != {dim}")
            if key in seen:
                raise VecFileError(f"duplicate key {key!r}")
            seen.add(key)
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<H", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(arr.astype("<f4").tobytes())


def read_vecfile(path: str | Path) -> tuple[int, str, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise VecFileError(f"{path}: truncated {what} at offset {offset}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(8, "magic") != MAGIC:
        raise VecFileError(f"{path}: bad magic")
    dim = struct.unpack("<I", take(4, "dim"))[0]
    count = struct.unpack("<Q", take(8, "count"))[0]
    comment_len = struct.unpack("<H", take(2, "comment length"))[0]
    comment = take(comment_len, "comment").decode("utf-8")
    vectors: dict[str, np.ndarray] = {}
    for _ in range(count):
        key_len = struct.unpack("<H", take(2, "key length"))[0]
        key = take(key_len, "key").decode("utf-8")
        if key in vectors:
            raise VecFileError(f"{path}: duplicate key {key!r}")
        vectors[key] = np.frombuffer(take(4 * dim, f"vector {key!r}"),
                                     dtype="<f4").copy()
    if offset != len(data):
        raise VecFileError(f"{path}: trailing bytes at offset {offset}")
    return dim, comment, vectors
