"""Paragraph vectorization: a built-in hashed lexical vectorizer plus a
loader for externally produced embedding files, and mean pooling.

The embedding file is a little-endian binary: magic "SOAPVEC1", uint32
dimension, uint64 record count, a uint16-length-prefixed UTF-8 comment,
then one record per paragraph — uint16-length-prefixed UTF-8 key
"note_id#paragraph_index" followed by dim float32 values. Keys are unique.
"""
from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import LabeledNote
from .errors import ContractViolation, CorpusError, FormatError
from .preprocess import Paragraph

MAGIC = b"SOAPVEC1"
DEFAULT_DIM = 256

_WORD = re.compile(r"[a-z0-9]+")
_HASH_KEY = b"soapseg-hash-v1"


@dataclass
class NoteMatrix:
    """Per-note stack of paragraph vectors, one row per paragraph."""

    note_id: str
    rows: np.ndarray  # (n_paragraphs, dim) float32

    def __post_init__(self) -> None:
        if self.rows.ndim != 2:
            raise ContractViolation("NoteMatrix rows must be 2-D")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def paragraph_key(note_id: str, index: int) -> str:
    return f"{note_id}#{index}"


def _feature_hash(feature: str) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8,
                             key=_HASH_KEY).digest()
    return int.from_bytes(digest, "little")


def hashed_vectorize(paragraph: Paragraph | str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Hash word uni+bigrams into a signed bucket vector, L2-normalized.

    Deterministic across runs and platforms (keyed 64-bit hash). The zero
    vector appears only for text with no word tokens.
    """
    if dim < 8 or dim & (dim - 1) != 0:
        raise ContractViolation(f"dim must be a power of two >= 8, got {dim}")
    text = paragraph.text if isinstance(paragraph, Paragraph) else paragraph
    words = _WORD.findall(text.lower())
    vec = np.zeros(dim, dtype=np.float64)
    features: Iterable[str] = words
    bigrams = (f"{a}_{b}" for a, b in zip(words, words[1:]))
    for feature in (*features, *bigrams):
        h = _feature_hash(feature)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h & (dim - 1)] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec.astype(np.float32)


def pool_sentences(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of sentence vectors, per dimension."""
    if len(vectors) == 0:
        raise ContractViolation("pool_sentences requires at least one vector")
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    if stacked.ndim != 2:
        raise ContractViolation("sentence vectors must be 1-D and uniform")
    return (stacked.sum(axis=0) / stacked.shape[0]).astype(np.float32)


# --------------------------------------------------------------------------
# Embedding file format


def write_embeddings(entries: Mapping[str, np.ndarray] | Sequence[tuple[str, np.ndarray]],
                     path: str | Path, comment: str = "") -> None:
    """Write key->vector records in iteration order."""
    items = list(entries.items()) if isinstance(entries, Mapping) else list(entries)
    if not items:
        raise ContractViolation("refusing to write an empty embedding file")
    dim = len(np.asarray(items[0][1]).reshape(-1))
    seen: set[str] = set()
    comment_bytes = comment.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", dim))
        fh.write(struct.pack("<Q", len(items)))
        fh.write(struct.pack("<H", len(comment_bytes)))
        fh.write(comment_bytes)
        for key, vec in items:
            arr = np.asarray(vec, dtype=np.float32).reshape(-1)
            if arr.shape[0] != dim:
                raise ContractViolation(
                    f"key {key!r}: dimension {arr.shape[0]} != header dim {dim}")
            if key in seen:
                raise CorpusError(f"duplicate embedding key {key!r}")
            seen.add(key)
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<H", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(arr.astype("<f4").tobytes())


@dataclass
class EmbeddingFile:
    dim: int
    comment: str
    vectors: dict[str, np.ndarray]


def load_embeddings(path: str | Path) -> EmbeddingFile:
    """Load a full embedding file into memory, validating the format."""
    data = Path(path).read_bytes()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise FormatError(f"{path}: truncated {what} at offset {offset}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(8, "magic") != MAGIC:
        raise FormatError(f"{path}: bad magic, not an embedding file")
    dim = struct.unpack("<I", take(4, "dimension"))[0]
    if dim < 1:
        raise FormatError(f"{path}: dimension must be >= 1, got {dim}")
    count = struct.unpack("<Q", take(8, "record count"))[0]
    comment_len = struct.unpack("<H", take(2, "comment length"))[0]
    comment = take(comment_len, "comment").decode("utf-8")

    vectors: dict[str, np.ndarray] = {}
    for _ in range(count):
        key_len = struct.unpack("<H", take(2, "key length"))[0]
        key = take(key_len, "key").decode("utf-8")
        if key in vectors:
            raise CorpusError(f"{path}: duplicate key {key!r}")
        raw = take(4 * dim, f"vector for {key!r}")
        vectors[key] = np.frombuffer(raw, dtype="<f4").copy()
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    return EmbeddingFile(dim=dim, comment=comment, vectors=vectors)


# --------------------------------------------------------------------------
# Providers


class HashedProvider:
    """Self-contained provider: vectors computed from paragraph text."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 8 or dim & (dim - 1) != 0:
            raise ContractViolation(f"dim must be a power of two >= 8, got {dim}")
        self.dim = dim

    def vector(self, note_id: str, index: int, paragraph: Paragraph) -> np.ndarray:
        return hashed_vectorize(paragraph, self.dim)


class FileProvider:
    """Provider backed by a preloaded embedding file."""

    def __init__(self, source: EmbeddingFile | str | Path):
        self._emb = source if isinstance(source, EmbeddingFile) else load_embeddings(source)
        self.dim = self._emb.dim

    def vector(self, note_id: str, index: int, paragraph: Paragraph) -> np.ndarray:
        key = paragraph_key(note_id, index)
        try:
            return self._emb.vectors[key]
        except KeyError:
            raise ContractViolation(
                f"embedding provider has no vector for key {key!r}") from None


def vectorize_note(note: LabeledNote, provider) -> NoteMatrix:
    """One vector row per paragraph, in paragraph order."""
    note_id = note.note.id
    rows = [provider.vector(note_id, p.index, p) for p in note.paragraphs]
    matrix = np.stack(rows).astype(np.float32) if rows else np.zeros((0, provider.dim), np.float32)
    return NoteMatrix(note_id=note_id, rows=matrix)


def vectorize_corpus(notes: Sequence[LabeledNote], provider) -> list[NoteMatrix]:
    return [vectorize_note(note, provider) for note in notes]


def save_matrix_cache(matrices: Sequence[NoteMatrix], path: str | Path) -> None:
    """Persist note matrices as an .npz archive keyed by note id."""
    order = [m.note_id for m in matrices]
    arrays = {f"m_{m.note_id}": m.rows for m in matrices}
    np.savez(path, _order=np.array(order, dtype=object), **arrays)


def load_matrix_cache(path: str | Path) -> list[NoteMatrix]:
    with np.load(path, allow_pickle=True) as data:
        order = list(data["_order"])
        return [NoteMatrix(note_id=str(nid), rows=data[f"m_{nid}"]) for nid in order]
