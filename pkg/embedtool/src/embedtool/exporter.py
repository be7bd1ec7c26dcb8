"""Run a sentence encoder over a JSONL corpus and write an EMB1 file.

The EMB1 layout is the whole contract with the consuming side, so this
module writes it from scratch rather than importing anything from the
consumer; the two codebases share only the bytes:

* magic ``EMB1``
* u32 little-endian row count n
* u32 little-endian dimension d
* n*d float32 little-endian values, row-major
* n ids, each a u16 little-endian byte length followed by UTF-8 bytes

Inference is pinned to deterministic single-threaded CPU mode, so the
same corpus, model, and batch size always produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
DEFAULT_BATCH_SIZE = 32
_MAGIC = b"EMB1"


class ExportError(RuntimeError):
    """Anything that stops an export: bad corpus, bad model, bad job."""


@dataclass(frozen=True)
class ExportJob:
    """One export request: where to read, what to encode with, where to write."""

    corpus: Path
    out: Path
    model: str = DEFAULT_MODEL
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ExportError(f"batch size must be >= 1, got {self.batch_size}")


def read_corpus(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs in file order, one per document with an abstract.

    The encoded text is title + " " + abstract.  Documents without an
    abstract are skipped: there is nothing meaningful to embed for
    them, and downstream consumers drop them anyway.
    """
    pairs: list[tuple[str, str]] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot read corpus: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
            doc_id = obj.get("id")
            if not isinstance(doc_id, str) or not doc_id:
                raise ExportError(f"{path}:{line_no}: missing document id")
            if doc_id in seen:
                raise ExportError(f"{path}:{line_no}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            abstract = obj.get("abstract") or ""
            if not abstract.strip():
                continue
            title = obj.get("title") or ""
            pairs.append((doc_id, f"{title} {abstract}"))
    if not pairs:
        raise ExportError(f"{path}: no documents with abstracts")
    return pairs


def load_encoder(name: str):
    """Load a sentence-transformers model in deterministic CPU mode."""
    import torch
    from sentence_transformers import SentenceTransformer

    torch.manual_seed(0)
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(1)
    try:
        encoder = SentenceTransformer(name, device="cpu")
    except Exception as exc:
        raise ExportError(f"cannot load encoder {name!r}: {exc}") from exc
    encoder.eval()
    return encoder


def write_emb1(ids: list[str], vectors: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(vectors, dtype="<f4")
    if arr.ndim != 2:
        raise ExportError(f"vectors must be 2-D, got shape {arr.shape}")
    if arr.shape[0] != len(ids):
        raise ExportError(f"{len(ids)} ids for {arr.shape[0]} vector rows")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes(order="C"))
        for doc_id in ids:
            raw = doc_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ExportError(f"id too long for format ({len(raw)} bytes)")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)


def export_embeddings(job: ExportJob) -> tuple[int, int]:
    """Encode every document and write the EMB1 file; returns (n, d).

    The output dimension is whatever the encoder reports, never assumed;
    for the default model that is 384.
    """
    pairs = read_corpus(job.corpus)
    encoder = load_encoder(job.model)
    # the dimension getter was renamed in newer sentence-transformers
    getter = getattr(encoder, "get_embedding_dimension", None)
    dim = getter() if getter is not None else encoder.get_sentence_embedding_dimension()

    vectors = encoder.encode(
        [text for _, text in pairs],
        batch_size=job.batch_size,
        convert_to_numpy=True,
        normalize_embeddings=False,
        show_progress_bar=False,
    ).astype(np.float32)

    if vectors.shape != (len(pairs), dim):
        raise ExportError(
            f"encoder returned shape {vectors.shape}, expected {(len(pairs), dim)}"
        )
    if not np.all(np.isfinite(vectors)):
        raise ExportError("encoder produced non-finite values")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ExportError("encoder produced a zero vector for a non-empty input")

    write_emb1([doc_id for doc_id, _ in pairs], vectors, job.out)
    return vectors.shape[0], vectors.shape[1]
