"""Text preprocessing, n-grams, taxonomy trend series, and gazetteer counts.

Preprocessing is intentionally model-free: tokens are lowercased word
characters, stopwords come from a fixed list shipped with the package,
and normalization defaults to a small suffix-stripping stemmer iterated
to a fixpoint (so running preprocess on its own output changes nothing).

Taxonomies group regexes under category labels; a trend series counts,
per publication year, the documents matching each category in title or
abstract.  A taxonomy may carry context cues (e.g. "data", "sampled"):
then a match only counts when it sits within a token window of a cue,
which keeps horizon words like "daily" from firing in unrelated prose.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import Document
from .errors import PatternError

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_VOWELS = set("aeiou")

DEFAULT_CONTEXT_WINDOW = 6

# Cue words that mark a sampling/data context for time-horizon counting.
# A trailing plural "s" on a token is tolerated when matching these.
DATA_CONTEXT_CUES = ("data", "interval", "sampled", "returns", "prices")


def _load_packaged_lines(name: str) -> list[str]:
    text = resources.files("litmine.data").joinpath(name).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def default_stopwords() -> frozenset[str]:
    """The versioned English stopword list shipped with the package."""
    return frozenset(_load_packaged_lines("stopwords.txt"))


def _has_vowel(word: str) -> bool:
    return any(ch in _VOWELS for ch in word)


def _stem_pass(word: str) -> str:
    """Apply one cascade of suffix rules; caller iterates to a fixpoint."""
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies") and len(word) > 4:
        word = word[:-3] + "y"
    elif word.endswith("ss"):
        pass
    elif word.endswith("s") and len(word) > 3 and not word.endswith(("us", "is")):
        word = word[:-1]

    if word.endswith("ied") and len(word) > 4:
        word = word[:-3] + "y"
    elif word.endswith("eed"):
        pass
    elif word.endswith("ed") and len(word) > 4 and _has_vowel(word[:-2]):
        word = word[:-2]
    elif word.endswith("ing") and len(word) > 5 and _has_vowel(word[:-3]):
        word = word[:-3]

    if word.endswith("ly") and len(word) > 4:
        word = word[:-2]
    if word.endswith("ion") and len(word) > 5 and word[-4] in "st":
        word = word[:-3]
    if word.endswith("e") and len(word) > 3:
        word = word[:-1]
    return word


def stem(word: str) -> str:
    """Suffix-stripping stemmer, iterated until the word stops changing."""
    while True:
        out = _stem_pass(word)
        if out == word:
            return out
        word = out


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str]
    normalizer: Callable[[str], str] = stem  # identity disables stemming

    @classmethod
    def default(cls) -> "PreprocessConfig":
        return cls(stopwords=default_stopwords())


def tokenize(text: str) -> list[str]:
    """Lowercased word-boundary tokens, no filtering."""
    return [m.group(0).lower() for m in _WORD_RE.finditer(text)]


def preprocess(text: str, config: PreprocessConfig | None = None) -> list[str]:
    """Tokenize, drop stopwords, normalize, and drop stopwords again.

    The second stopword pass keeps the output stable under reprocessing:
    a normalizer may map a content word onto a stopword ("doing" to
    "do"), which must not survive in a token list that claims to carry
    none.
    """
    if config is None:
        config = PreprocessConfig.default()
    if not config.stopwords:
        raise ValueError("stopword list must be non-empty")
    normalize = config.normalizer
    out: list[str] = []
    for token in tokenize(text):
        if token in config.stopwords:
            continue
        token = normalize(token)
        if token and token not in config.stopwords:
            out.append(token)
    return out


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    """Counts of all contiguous n-token windows."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def yearly_share(subset: dict[int, int], universe: dict[int, int]) -> dict[int, float]:
    """Basis points of the universe captured by the subset, per year.

    bps(year) = 10000 * subset(year) / universe(year); years present in
    the universe but absent from the subset report 0.
    """
    for year, count in subset.items():
        if count > universe.get(year, 0):
            if universe.get(year, 0) == 0:
                raise ValueError(f"year {year}: subset {count} > 0 but universe is 0")
            raise ValueError(
                f"year {year}: subset {count} exceeds universe {universe[year]}"
            )
    return {
        year: 10000.0 * subset.get(year, 0) / total
        for year, total in sorted(universe.items())
        if total > 0
    }


@dataclass(frozen=True)
class TaxonomyCategory:
    label: str
    patterns: tuple[re.Pattern[str], ...]


@dataclass(frozen=True)
class Taxonomy:
    """Named set of regex categories, optionally gated by context cues."""

    name: str
    categories: tuple[TaxonomyCategory, ...]
    context_cues: frozenset[str] = frozenset()
    context_window: int = DEFAULT_CONTEXT_WINDOW

    def category_labels(self) -> list[str]:
        return [c.label for c in self.categories]


def load_taxonomy(
    path: str | Path,
    name: str | None = None,
    context_cues: Iterable[str] = (),
    context_window: int = DEFAULT_CONTEXT_WINDOW,
) -> Taxonomy:
    """Read a taxonomy from JSONL lines of {taxonomy, category, regex}.

    Lines are grouped by category in first-seen order; all regexes
    compile case-insensitively with ``.`` kept as a wildcard.
    """
    order: list[str] = []
    grouped: dict[str, list[re.Pattern[str]]] = {}
    tax_name = name
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if tax_name is None:
                tax_name = obj["taxonomy"]
            category = obj["category"]
            try:
                pattern = re.compile(obj["regex"], re.IGNORECASE)
            except re.error as exc:
                raise PatternError(f"{path}:{line_no} category {category!r}: {exc}") from exc
            if category not in grouped:
                order.append(category)
                grouped[category] = []
            grouped[category].append(pattern)
    categories = tuple(
        TaxonomyCategory(label=c, patterns=tuple(grouped[c])) for c in order
    )
    return Taxonomy(
        name=tax_name or Path(path).stem,
        categories=categories,
        context_cues=frozenset(c.lower() for c in context_cues),
        context_window=context_window,
    )


def packaged_taxonomy(
    name: str,
    context_cues: Iterable[str] = (),
    context_window: int = DEFAULT_CONTEXT_WINDOW,
) -> Taxonomy:
    """Load one of the taxonomies shipped under litmine/data."""
    with resources.as_file(resources.files("litmine.data").joinpath(f"{name}.jsonl")) as p:
        return load_taxonomy(p, name=name, context_cues=context_cues, context_window=context_window)


def _cue_positions(tokens: list[str], cues: frozenset[str]) -> list[int]:
    positions = []
    for i, tok in enumerate(tokens):
        if tok in cues or (tok.endswith("s") and tok[:-1] in cues):
            positions.append(i)
    return positions


def _match_in_context(text: str, category: TaxonomyCategory, taxonomy: Taxonomy) -> bool:
    """True when a category pattern matches; cue-gated if cues are set."""
    if not taxonomy.context_cues:
        return any(p.search(text) for p in category.patterns)
    spans = [(m.start(), m.end()) for m in _WORD_RE.finditer(text)]
    tokens = [text[a:b].lower() for a, b in spans]
    cue_idx = _cue_positions(tokens, taxonomy.context_cues)
    if not cue_idx:
        return False
    for pattern in category.patterns:
        for m in pattern.finditer(text):
            # token index where the match begins
            tok_at = next((i for i, (a, b) in enumerate(spans) if a <= m.start() < b), None)
            if tok_at is None:
                continue
            if any(abs(tok_at - c) <= taxonomy.context_window for c in cue_idx):
                return True
    return False


@dataclass
class TrendSeries:
    """Document counts per (year, category); multi-label by design."""

    categories: list[str]
    counts: dict[tuple[int, str], int] = field(default_factory=dict)

    def add(self, year: int, category: str) -> None:
        self.counts[(year, category)] = self.counts.get((year, category), 0) + 1

    def years(self) -> list[int]:
        return sorted({y for y, _ in self.counts})

    def get(self, year: int, category: str) -> int:
        return self.counts.get((year, category), 0)

    def year_total(self, year: int) -> int:
        return sum(v for (y, _), v in self.counts.items() if y == year)

    def category_total(self, category: str) -> int:
        return sum(v for (_, c), v in self.counts.items() if c == category)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["year", "category", "count"])
            for year in self.years():
                for category in self.categories:
                    writer.writerow([year, category, self.get(year, category)])


def taxonomy_trends(corpus: Iterable[Document], taxonomy: Taxonomy) -> TrendSeries:
    """Count, per year and category, documents matching in title+abstract.

    Documents without a year are skipped; one document may contribute to
    several categories but at most once to each.
    """
    series = TrendSeries(categories=taxonomy.category_labels())
    for doc in corpus:
        if not doc.has_year:
            continue
        text = f"{doc.title} {doc.abstract}"
        for category in taxonomy.categories:
            if _match_in_context(text, category, taxonomy):
                series.add(doc.year, category.label)
    return series


def load_gazetteer(path: str | Path) -> list[tuple[str, list[str]]]:
    """Read JSONL lines of {entity, aliases:[...]}, order preserved."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                out.append((obj["entity"], list(obj["aliases"])))
    return out


def packaged_gazetteer(name: str) -> list[tuple[str, list[str]]]:
    with resources.as_file(resources.files("litmine.data").joinpath(f"{name}.jsonl")) as p:
        return load_gazetteer(p)


def gazetteer_entities(
    corpus: Iterable[Document],
    gazetteer: Sequence[tuple[str, Sequence[str]]],
) -> dict[str, int]:
    """Per-entity count of documents containing any alias.

    Aliases match case-insensitively on word boundaries in title+abstract;
    a document counts at most once per entity.
    """
    if not gazetteer:
        raise ValueError("gazetteer must be non-empty")
    compiled: list[tuple[str, re.Pattern[str]]] = []
    for entity, aliases in gazetteer:
        alternation = "|".join(re.escape(a) for a in aliases)
        compiled.append((entity, re.compile(rf"\b(?:{alternation})\b", re.IGNORECASE)))
    counts = {entity: 0 for entity, _ in compiled}
    for doc in corpus:
        text = f"{doc.title} {doc.abstract}"
        for entity, pattern in compiled:
            if pattern.search(text):
                counts[entity] += 1
    return counts
