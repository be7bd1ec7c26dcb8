"""Embedding matrices: binary import/export, hashing fallback, remote fetch.

The on-disk carrier is the EMB1 format, fixed so independently written
files interoperate bit-exactly:

* magic bytes ``EMB1``
* u32 little-endian row count n
* u32 little-endian dimension d
* n*d float32 little-endian values, row-major
* n ids, each a u16 little-endian byte length followed by UTF-8 bytes

The fallback embedder is a seeded feature-hashing scheme: every token is
hashed (keyed by the seed) to one coordinate and a sign, and the summed
vector is L2-normalized.  It is a pure function of (text, dim, seed), so
pipelines stay testable with no encoder anywhere near the machine.
"""

from __future__ import annotations

import hashlib
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmbeddingError
from .transports import RetryPolicy

DEFAULT_DIM = 384
_MAGIC = b"EMB1"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable n x d float matrix with aligned, unique row ids."""

    ids: tuple[str, ...]
    vectors: np.ndarray
    zero_rows: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2:
            raise EmbeddingError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        if len(self.ids) != self.vectors.shape[0]:
            raise EmbeddingError(
                f"{len(self.ids)} ids for {self.vectors.shape[0]} vector rows"
            )
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingError("duplicate ids in embedding matrix")
        if self.vectors.size and not np.all(np.isfinite(self.vectors)):
            raise EmbeddingError("non-finite values in embedding matrix")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, doc_id: str) -> np.ndarray:
        try:
            i = self.ids.index(doc_id)
        except ValueError:
            raise EmbeddingError(f"unknown id: {doc_id}") from None
        return self.vectors[i]

    def subset(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        """Rows for the given ids, in the given order."""
        pos = {doc_id: i for i, doc_id in enumerate(self.ids)}
        missing = [i for i in ids if i not in pos]
        if missing:
            raise EmbeddingError(f"ids not in matrix: {missing[:5]}")
        rows = [pos[i] for i in ids]
        zero = set(self.zero_rows)
        return EmbeddingMatrix(
            ids=tuple(ids),
            vectors=self.vectors[rows].copy(),
            zero_rows=tuple(j for j, r in enumerate(rows) if r in zero),
        )


def export_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write a matrix in the EMB1 binary format (float32, little-endian)."""
    vectors = np.ascontiguousarray(matrix.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", matrix.n, matrix.dim))
        fh.write(vectors.tobytes(order="C"))
        for doc_id in matrix.ids:
            raw = doc_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise EmbeddingError(f"id too long for format ({len(raw)} bytes)")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)


def import_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an EMB1 file; floats round-trip bit-exactly."""
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise EmbeddingError(f"bad magic in {path}: {data[:4]!r}")
    if len(data) < 12:
        raise EmbeddingError(f"truncated header in {path}")
    n, d = struct.unpack_from("<II", data, 4)
    offset = 12
    matrix_bytes = n * d * 4
    if len(data) < offset + matrix_bytes:
        raise EmbeddingError(f"truncated matrix payload in {path}")
    vectors = np.frombuffer(data, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += matrix_bytes
    ids: list[str] = []
    for _ in range(n):
        if len(data) < offset + 2:
            raise EmbeddingError(f"truncated id block in {path}")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if len(data) < offset + id_len:
            raise EmbeddingError(f"truncated id block in {path}")
        ids.append(data[offset : offset + id_len].decode("utf-8"))
        offset += id_len
    if offset != len(data):
        raise EmbeddingError(f"{len(data) - offset} trailing bytes in {path}")
    return EmbeddingMatrix(ids=tuple(ids), vectors=vectors.copy())


def _token_slot(token: str, seed: int, dim: int) -> tuple[int, int]:
    """Keyed hash of a token to (coordinate, sign)."""
    key = seed.to_bytes(8, "little", signed=True)
    digest = hashlib.blake2b(token.encode("utf-8"), key=key, digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, 1 if (value >> 63) & 1 else -1


def fallback_embed(
    texts: Sequence[str],
    dim: int = DEFAULT_DIM,
    seed: int = 0,
    ids: Sequence[str] | None = None,
) -> EmbeddingMatrix:
    """Deterministic feature-hashing embedding of each text.

    Empty (token-free) texts produce zero vectors, reported through the
    matrix's ``zero_rows``; all other rows are unit length.
    """
    if dim < 8:
        raise EmbeddingError(f"dim must be >= 8, got {dim}")
    if ids is None:
        ids = tuple(f"t{i}" for i in range(len(texts)))
    vectors = np.zeros((len(texts), dim), dtype=np.float64)
    zero_rows: list[int] = []
    for i, text in enumerate(texts):
        tokens = [t.lower() for t in text.split()]
        tokens = ["".join(ch for ch in t if ch.isalnum()) for t in tokens]
        tokens = [t for t in tokens if t]
        if not tokens:
            zero_rows.append(i)
            continue
        for token in tokens:
            slot, sign = _token_slot(token, seed, dim)
            vectors[i, slot] += sign
        norm = float(np.linalg.norm(vectors[i]))
        if norm > 0:
            vectors[i] /= norm
        else:
            # signs cancelled exactly; rare but possible
            zero_rows.append(i)
    return EmbeddingMatrix(ids=tuple(ids), vectors=vectors, zero_rows=tuple(zero_rows))


def remote_embed(
    texts: Sequence[str],
    transport,
    batch_size: int = 32,
    policy: RetryPolicy | None = None,
    ids: Sequence[str] | None = None,
) -> EmbeddingMatrix:
    """Fetch embeddings over a transport in order-preserving batches."""
    if batch_size < 1:
        raise EmbeddingError(f"batch_size must be >= 1, got {batch_size}")
    if policy is None:
        policy = RetryPolicy()
    if ids is None:
        ids = tuple(f"t{i}" for i in range(len(texts)))
    rows: list[list[float]] = []
    dim: int | None = None
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start : start + batch_size])
        vectors = policy.call(lambda b=batch: transport.embed_batch(b))
        for vec in vectors:
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise EmbeddingError(
                    f"dimension mismatch across batches: {len(vec)} != {dim}"
                )
            rows.append(vec)
    vectors_arr = np.asarray(rows, dtype=np.float64)
    if len(texts) == 0:
        vectors_arr = np.zeros((0, 0), dtype=np.float64)
    return EmbeddingMatrix(ids=tuple(ids), vectors=vectors_arr)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped into [-1, 1] against float rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise EmbeddingError("cosine undefined for zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
