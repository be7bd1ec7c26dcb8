"""Paper-corpus data model, streaming JSONL ingestion, and sampling.

A corpus lives on disk as UTF-8 JSONL, one document object per line with
keys ``id``, ``title``, ``abstract``, ``body``, ``year``, ``venue``.
Unknown keys are ignored.  Loading builds a byte-offset index so single
documents can be fetched without rescanning the file; iteration streams
lines in insertion order.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorpusError

YEAR_MIN = 1900
YEAR_MAX = 2100

# Fields a caller may request through the `fields` mask of iterate().
DOCUMENT_FIELDS = frozenset({"id", "title", "abstract", "body", "year", "venue"})


@dataclass(frozen=True)
class Document:
    """One paper record.

    ``abstract`` may be the empty string; such documents are kept in the
    store but reported by :attr:`has_abstract` so downstream filtering can
    drop them.  ``year`` is ``None`` when unknown, never 0.
    """

    id: str
    title: str
    abstract: str = ""
    body: str | None = None
    year: int | None = None
    venue: str | None = None

    @property
    def has_abstract(self) -> bool:
        return bool(self.abstract.strip())

    @property
    def has_year(self) -> bool:
        return self.year is not None

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "title": self.title,
                "abstract": self.abstract,
                "body": self.body,
                "year": self.year,
                "venue": self.venue,
            },
            ensure_ascii=False,
            sort_keys=True,
        )


def _parse_record(obj: object, line_no: int) -> Document:
    """Validate one decoded JSON object against the document schema."""
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: record is not a JSON object")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {line_no}: missing or empty id")
    title = obj.get("title")
    if not isinstance(title, str):
        raise CorpusError(f"line {line_no} (id={doc_id}): title must be a string")
    abstract = obj.get("abstract", "")
    if abstract is None:
        abstract = ""
    if not isinstance(abstract, str):
        raise CorpusError(f"line {line_no} (id={doc_id}): abstract must be a string")
    body = obj.get("body")
    if body is not None and not isinstance(body, str):
        raise CorpusError(f"line {line_no} (id={doc_id}): body must be a string or null")
    year = obj.get("year")
    if year is not None:
        if isinstance(year, bool) or not isinstance(year, int):
            raise CorpusError(f"line {line_no} (id={doc_id}): year must be an integer or null")
        if not YEAR_MIN <= year <= YEAR_MAX:
            raise CorpusError(
                f"line {line_no} (id={doc_id}): year {year} outside [{YEAR_MIN}, {YEAR_MAX}]"
            )
    venue = obj.get("venue")
    if venue is not None and not isinstance(venue, str):
        raise CorpusError(f"line {line_no} (id={doc_id}): venue must be a string or null")
    return Document(id=doc_id, title=title, abstract=abstract, body=body, year=year, venue=venue)


@dataclass
class CorpusStore:
    """Read-only handle on a loaded corpus file.

    ``index`` maps document id to the byte offset of its line, giving
    O(1) random access by id; iteration order is file (insertion) order.
    """

    path: Path
    index: dict[str, int] = field(default_factory=dict)
    skipped: int = 0

    @property
    def doc_count(self) -> int:
        return len(self.index)

    def get(self, doc_id: str) -> Document:
        if doc_id not in self.index:
            raise CorpusError(f"unknown document id: {doc_id}")
        with open(self.path, "rb") as fh:
            fh.seek(self.index[doc_id])
            line = fh.readline().decode("utf-8")
        return _parse_record(json.loads(line), line_no=-1)

    def __iter__(self) -> Iterator[Document]:
        return iterate(self)


def load_corpus(path: str | Path, strictness: str = "strict") -> CorpusStore:
    """Load a JSONL corpus file and index it by document id.

    Parameters
    ----------
    path : str or Path
        Corpus file location.
    strictness : {"strict", "skip_bad"}
        In strict mode the first malformed line aborts the load; in
        skip_bad mode malformed lines are counted on ``store.skipped``
        and skipped.  Duplicate ids abort in either mode.
    """
    if strictness not in ("strict", "skip_bad"):
        raise ValueError(f"strictness must be 'strict' or 'skip_bad', got {strictness!r}")
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")

    index: dict[str, int] = {}
    skipped = 0
    offset = 0
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line_offset = offset
            offset += len(raw)
            stripped = raw.strip()
            if not stripped:
                continue
            try:
                doc = _parse_record(json.loads(stripped.decode("utf-8")), line_no)
            except (json.JSONDecodeError, UnicodeDecodeError, CorpusError) as exc:
                if strictness == "strict":
                    if isinstance(exc, CorpusError):
                        raise
                    raise CorpusError(f"line {line_no}: {exc}") from exc
                skipped += 1
                continue
            if doc.id in index:
                raise CorpusError(f"line {line_no}: duplicate document id {doc.id!r}")
            index[doc.id] = line_offset
    return CorpusStore(path=path, index=index, skipped=skipped)


def iterate(store: CorpusStore, fields: Iterable[str] | None = None) -> Iterator[Document]:
    """Yield every document once, in insertion order.

    ``fields`` restricts which fields are populated; unrequested text
    fields come back empty (or ``None``) so large bodies need not be
    materialized.  ``id`` is always populated.
    """
    mask: frozenset[str] | None = None
    if fields is not None:
        mask = frozenset(fields)
        unknown = mask - DOCUMENT_FIELDS
        if unknown:
            raise ValueError(f"unknown document fields: {sorted(unknown)}")

    with open(store.path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped.decode("utf-8"))
                doc = _parse_record(obj, line_no)
            except (json.JSONDecodeError, UnicodeDecodeError, CorpusError):
                continue  # malformed lines were already accounted for at load
            if doc.id not in store.index:
                continue
            if mask is not None:
                doc = Document(
                    id=doc.id,
                    title=doc.title if "title" in mask else "",
                    abstract=doc.abstract if "abstract" in mask else "",
                    body=doc.body if "body" in mask else None,
                    year=doc.year if "year" in mask else None,
                    venue=doc.venue if "venue" in mask else None,
                )
            yield doc


def sample(store: CorpusStore, n: int, seed: int) -> list[Document]:
    """Draw ``n`` distinct documents uniformly without replacement.

    Pure function of (store contents, n, seed): the same seed always
    returns the same sample, for export to human validation.
    """
    if n > store.doc_count:
        raise CorpusError(f"sample size {n} exceeds corpus size {store.doc_count}")
    ids = list(store.index)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(ids), size=n, replace=False)
    return [store.get(ids[i]) for i in chosen]


def write_corpus(docs: Iterable[Document], path: str | Path) -> int:
    """Write documents as JSONL; returns the number written."""
    path = Path(path)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(doc.to_json())
            fh.write("\n")
            count += 1
    return count
