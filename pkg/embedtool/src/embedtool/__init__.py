"""Offline exporter: sentence-encoder embeddings of a corpus, as EMB1 files."""

from .exporter import (
    DEFAULT_MODEL,
    ExportError,
    ExportJob,
    export_embeddings,
    read_corpus,
    write_emb1,
)

__all__ = [
    "DEFAULT_MODEL",
    "ExportError",
    "ExportJob",
    "export_embeddings",
    "read_corpus",
    "write_emb1",
]
