"""Keyword-regex compilation, document matching, and corpus reduction.

Patterns arrive as (label, regex source, category) triples, typically from
a JSONL spec file of ``{label, regex, category}`` objects.  Matching is
case-insensitive on raw (un-normalized) title and abstract text, and the
``.`` wildcard is kept as written so a source like ``investment strateg.``
covers both "strategy" and "strategies".

The frequency table counts documents, not match occurrences: a label's
``abstract`` column is the number of documents with at least one abstract
hit, ``title`` likewise, and ``both`` the number hitting in title OR
abstract (the union).
"""

from __future__ import annotations

import csv
import json
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import CorpusStore, Document, write_corpus
from .errors import PatternError


@dataclass(frozen=True)
class PatternEntry:
    label: str
    source: str
    category: str
    compiled: re.Pattern[str]


@dataclass(frozen=True)
class PatternSet:
    """Compiled, case-insensitive keyword patterns with unique labels."""

    entries: tuple[PatternEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]


@dataclass(frozen=True)
class LabelHits:
    title_count: int
    abstract_count: int

    @property
    def in_title(self) -> bool:
        return self.title_count > 0

    @property
    def in_abstract(self) -> bool:
        return self.abstract_count > 0


@dataclass(frozen=True)
class KeywordHits:
    """Per-label non-overlapping match counts for one document."""

    doc_id: str
    per_label: dict[str, LabelHits]

    def any_hit(self) -> bool:
        return any(h.in_title or h.in_abstract for h in self.per_label.values())


@dataclass
class FrequencyTable:
    """Document counts per label: abstract hits, title hits, and their union."""

    labels: list[str]
    abstract_docs: dict[str, int] = field(default_factory=dict)
    title_docs: dict[str, int] = field(default_factory=dict)
    both_docs: dict[str, int] = field(default_factory=dict)

    def add(self, hits: KeywordHits) -> None:
        for label, h in hits.per_label.items():
            if h.in_abstract:
                self.abstract_docs[label] = self.abstract_docs.get(label, 0) + 1
            if h.in_title:
                self.title_docs[label] = self.title_docs.get(label, 0) + 1
            if h.in_abstract or h.in_title:
                self.both_docs[label] = self.both_docs.get(label, 0) + 1

    def row(self, label: str) -> tuple[int, int, int]:
        return (
            self.abstract_docs.get(label, 0),
            self.title_docs.get(label, 0),
            self.both_docs.get(label, 0),
        )

    def totals(self) -> tuple[int, int, int]:
        a = sum(self.abstract_docs.get(lb, 0) for lb in self.labels)
        t = sum(self.title_docs.get(lb, 0) for lb in self.labels)
        b = sum(self.both_docs.get(lb, 0) for lb in self.labels)
        return a, t, b

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "abstract", "title", "both"])
            for label in self.labels:
                writer.writerow([label, *self.row(label)])
            writer.writerow(["SUM", *self.totals()])


@dataclass
class FilteredCorpus:
    """Ordered in-memory subset of a corpus that survived keyword filtering."""

    docs: list[Document]

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.docs)

    def ids(self) -> list[str]:
        return [d.id for d in self.docs]

    def write(self, path: str | Path) -> int:
        return write_corpus(self.docs, path)


def compile_patterns(
    spec: Sequence[tuple[str, str, str]] | Sequence[dict],
    allow_empty: bool = False,
) -> PatternSet:
    """Compile (label, regex source, category) triples case-insensitively.

    Sources are used as written: ``.`` stays a single-character wildcard
    and ``|`` alternation binds as in any regex.  Dict entries with keys
    ``label``/``regex``/``category`` are accepted interchangeably.
    """
    if not spec and not allow_empty:
        raise PatternError("empty pattern spec")
    entries: list[PatternEntry] = []
    seen: set[str] = set()
    for item in spec:
        if isinstance(item, dict):
            label, source, category = item["label"], item["regex"], item.get("category", "")
        else:
            label, source, category = item
        if not source:
            raise PatternError(f"pattern {label!r}: empty regex source")
        if label in seen:
            raise PatternError(f"duplicate pattern label {label!r}")
        seen.add(label)
        try:
            compiled = re.compile(source, re.IGNORECASE)
        except re.error as exc:
            raise PatternError(f"pattern {label!r}: {exc}") from exc
        entries.append(PatternEntry(label=label, source=source, category=category, compiled=compiled))
    return PatternSet(entries=tuple(entries))


def load_pattern_spec(path: str | Path) -> list[dict]:
    """Read a JSONL pattern spec file into a list of entry dicts."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


def packaged_patterns() -> PatternSet:
    """The nine trading-strategy keyword patterns shipped with the package."""
    text = resources.files("litmine.data").joinpath("keyword_patterns.jsonl").read_text(encoding="utf-8")
    entries = [json.loads(line) for line in text.splitlines() if line.strip()]
    return compile_patterns(entries)


def match_document(doc: Document, patterns: PatternSet) -> KeywordHits:
    """Count non-overlapping matches of every pattern in title and abstract."""
    per_label: dict[str, LabelHits] = {}
    for entry in patterns.entries:
        title_count = sum(1 for _ in entry.compiled.finditer(doc.title))
        abstract_count = sum(1 for _ in entry.compiled.finditer(doc.abstract))
        per_label[entry.label] = LabelHits(title_count=title_count, abstract_count=abstract_count)
    return KeywordHits(doc_id=doc.id, per_label=per_label)


def filter_corpus(
    store: CorpusStore | Iterable[Document],
    patterns: PatternSet,
    require_abstract: bool = True,
) -> tuple[FilteredCorpus, FrequencyTable]:
    """Reduce a corpus to documents hitting at least one pattern.

    Returns the surviving documents (insertion order preserved) together
    with the per-label frequency table.  With ``require_abstract`` set,
    documents whose abstract is empty are dropped from the filtered set
    and from the table, mirroring the upstream data-selection step.
    """
    table = FrequencyTable(labels=patterns.labels())
    kept: list[Document] = []
    for doc in store:
        if require_abstract and not doc.has_abstract:
            continue
        hits = match_document(doc, patterns)
        if hits.any_hit():
            table.add(hits)
            kept.append(doc)
    return FilteredCorpus(docs=kept), table
