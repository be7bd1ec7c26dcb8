"""Per-document question protocol against an LLM endpoint, plus evaluation.

The protocol sends one document per request (batching several documents
into one prompt degrades answer quality) and demands a rigid labeled-line
answer block so parsing never guesses.  A keyword-regex baseline answers
the same questions mechanically, which makes the two answer sets directly
comparable through the 2x2 confusion matrices below.

Answer stores are append-only JSONL, one record per document.  Stored
records carry no wall-clock timestamp by default so a rerun against the
same scripted transport produces a byte-identical file.
"""

from __future__ import annotations

import csv
import json
import re
import warnings
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .corpus import Document
from .errors import (
    AnswerFormatError,
    LitmineError,
    PromptTooLargeError,
    TransportError,
)
from .transports import RetryPolicy, prompt_digest

SIZE_BUDGET = 120_000

VERDICT_YES = "yes"
VERDICT_NO = "no"
VERDICT_NA = "not-applicable"
VERDICT_FAILED = "failed"

CELL_ORDER = (("no", "no"), ("no", "yes"), ("yes", "no"), ("yes", "yes"))

FALLBACK_FREQUENCY_BIN = "NotSpecified"
FALLBACK_LOSS_GROUP = "Other/Unspecified"
FALLBACK_MODEL_CATEGORY = "Others"


@dataclass(frozen=True)
class Question:
    """One protocol question: a stable key, the text, and the answer kind."""

    key: str
    text: str
    kind: str = "yes_no"  # "yes_no" or "free_text"


@dataclass(frozen=True)
class QuestionSet:
    questions: tuple[Question, ...]

    def __post_init__(self) -> None:
        keys = [q.key for q in self.questions]
        if len(set(keys)) != len(keys):
            raise LitmineError("question keys must be unique")

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self) -> Iterator[Question]:
        return iter(self.questions)

    def keys(self) -> list[str]:
        return [q.key for q in self.questions]

    @classmethod
    def default(cls) -> "QuestionSet":
        return cls(
            questions=(
                Question("comparison", "If there is a comparison of different models or methods used."),
                Question("hpo", "If there is hyperparameter optimization."),
                Question("frequency", "The frequency of data used.", kind="free_text"),
                Question("loss", "The loss function used.", kind="free_text"),
                Question("best_model", "The best model (chosen in comparison).", kind="free_text"),
            )
        )


@dataclass(frozen=True)
class Answer:
    verdict: str
    elaboration: str = ""


@dataclass(frozen=True)
class AnswerRecord:
    """Answers for one document plus provenance and protocol health flags."""

    doc_id: str
    answers: dict[str, Answer]
    model: str = ""
    scope: str = "abstract"
    attention_check: str = ""
    attention_check_passed: bool = False
    violations: tuple[str, ...] = ()
    timestamp: str | None = None

    def verdict(self, key: str) -> str:
        if key not in self.answers:
            raise LitmineError(f"record {self.doc_id!r} has no answer for {key!r}")
        return self.answers[key].verdict

    def elaboration(self, key: str) -> str:
        if key not in self.answers:
            raise LitmineError(f"record {self.doc_id!r} has no answer for {key!r}")
        return self.answers[key].elaboration

    def to_json_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "answers": {
                k: {"verdict": a.verdict, "elaboration": a.elaboration}
                for k, a in self.answers.items()
            },
            "model": self.model,
            "scope": self.scope,
            "attention_check": self.attention_check,
            "attention_check_passed": self.attention_check_passed,
            "violations": list(self.violations),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "AnswerRecord":
        return cls(
            doc_id=obj["doc_id"],
            answers={
                k: Answer(verdict=a["verdict"], elaboration=a.get("elaboration", ""))
                for k, a in obj["answers"].items()
            },
            model=obj.get("model", ""),
            scope=obj.get("scope", "abstract"),
            attention_check=obj.get("attention_check", ""),
            attention_check_passed=obj.get("attention_check_passed", False),
            violations=tuple(obj.get("violations", ())),
            timestamp=obj.get("timestamp"),
        )


def _scoped_text(doc: Document, scope: str) -> str:
    if scope == "abstract":
        return doc.abstract
    if scope == "fulltext":
        if not doc.body:
            raise LitmineError(f"document {doc.id!r}: fulltext scope requires a body")
        return f"{doc.abstract}\n\n{doc.body}" if doc.abstract else doc.body
    raise LitmineError(f"unknown scope {scope!r}; expected 'abstract' or 'fulltext'")


def build_prompt(
    doc: Document,
    scope: str = "abstract",
    questions: QuestionSet | None = None,
) -> str:
    """Compose the single-document prompt with the rigid answer block.

    The block format is what makes responses machine-parseable: one
    ``Qn_VERDICT`` and one ``Qn_ELABORATION`` line per question, then an
    ``ATTENTION_CHECK`` line asking the model to summarise the task at
    hand in one sentence.  Deterministic for a given document and scope.
    """
    qs = questions or QuestionSet.default()
    text = _scoped_text(doc, scope)
    if not text.strip():
        raise LitmineError(f"document {doc.id!r}: empty text for scope {scope!r}")

    lines = [
        "You are reviewing a single research paper. Using only the text below,",
        "answer the following questions about it.",
        "",
        "Questions:",
    ]
    for i, q in enumerate(qs, start=1):
        lines.append(f"{i}. {q.text}")
    lines += [
        "",
        "Reply with exactly this block and nothing else, one line per field:",
    ]
    for i, q in enumerate(qs, start=1):
        lines.append(f"Q{i}_VERDICT: YES, NO, or NOT_APPLICABLE")
        lines.append(f"Q{i}_ELABORATION: supporting detail, empty if none")
    lines += [
        "ATTENTION_CHECK: summarise the task at hand in one sentence",
        "",
        f"Title: {doc.title}",
        f"Text: {text}",
    ]
    return "\n".join(lines)


def ask(
    transport,
    prompt: str,
    policy: RetryPolicy | None = None,
    size_budget: int = SIZE_BUDGET,
) -> str:
    """Send one prompt, enforcing the size budget before any network call."""
    if len(prompt) > size_budget:
        raise PromptTooLargeError(
            f"prompt is {len(prompt)} characters, budget is {size_budget}"
        )
    policy = policy or RetryPolicy()
    return policy.call(lambda: transport.complete(prompt))


# whitespace inside these patterns must stay on the line ([ \t], not \s):
# an empty labeled line would otherwise swallow the next line as its value
_VERDICT_LINE = re.compile(
    r"^[ \t]*Q(\d+)_VERDICT[ \t]*:[ \t]*(.*?)[ \t]*$", re.IGNORECASE | re.MULTILINE
)
_ELAB_LINE = re.compile(
    r"^[ \t]*Q(\d+)_ELABORATION[ \t]*:[ \t]*(.*?)[ \t]*$", re.IGNORECASE | re.MULTILINE
)
_ATTENTION_LINE = re.compile(
    r"^[ \t]*ATTENTION_CHECK[ \t]*:[ \t]*(.*?)[ \t]*$", re.IGNORECASE | re.MULTILINE
)


def _normalize_verdict(raw: str) -> str:
    token = raw.strip().strip(".,;!").upper().replace("-", "_").replace(" ", "_")
    if token.startswith("NOT_APPLICABLE") or token in ("N/A", "NA"):
        return VERDICT_NA
    if token.startswith("YES"):
        return VERDICT_YES
    if token.startswith("NO"):
        return VERDICT_NO
    return VERDICT_FAILED


def parse_answer(
    raw: str,
    questions: QuestionSet | None = None,
    doc_id: str = "",
    model: str = "",
    scope: str = "abstract",
) -> AnswerRecord:
    """Extract an AnswerRecord from a response's labeled answer block.

    A question whose verdict line is absent or unreadable is marked
    ``failed``, never guessed.  A ``yes`` verdict with an empty
    elaboration is kept but flagged in ``violations``.  Raises
    AnswerFormatError when no verdict line exists at all.
    """
    qs = questions or QuestionSet.default()
    verdict_lines = {int(m.group(1)): m.group(2) for m in _VERDICT_LINE.finditer(raw)}
    if not verdict_lines:
        raise AnswerFormatError(f"document {doc_id!r}: no answer block found")
    elab_lines = {int(m.group(1)): m.group(2) for m in _ELAB_LINE.finditer(raw)}
    attention = _ATTENTION_LINE.search(raw)

    answers: dict[str, Answer] = {}
    violations: list[str] = []
    for i, q in enumerate(qs, start=1):
        if i in verdict_lines:
            verdict = _normalize_verdict(verdict_lines[i])
        else:
            verdict = VERDICT_FAILED
        elaboration = elab_lines.get(i, "").strip()
        if verdict == VERDICT_YES and not elaboration:
            violations.append(q.key)
        answers[q.key] = Answer(verdict=verdict, elaboration=elaboration)

    attention_text = attention.group(1).strip() if attention else ""
    return AnswerRecord(
        doc_id=doc_id,
        answers=answers,
        model=model,
        scope=scope,
        attention_check=attention_text,
        attention_check_passed=bool(attention_text),
        violations=tuple(violations),
    )


# The baseline's five keyword groups and its elaboration quirks are kept
# exactly as-is so its answers stay comparable run over run: the sentence
# tail ``.*?\.`` binds only to the last alternative of each findall, and
# the frequency/loss elaborations keep just the first hit.
_COMPARISON_PAT = r"comparison|compare|benchmark|evaluate|versus|comparison study|side-by-side|comparative analysis"
_HPO_PAT = r"hyperparameter|tuning|optimization|grid search|random search|bayesian optimization|hyperparameter tuning|parameter search|hyper-optimization"
_FREQUENCY_PAT = r"daily|weekly|monthly|minute-level|hourly|annually|yearly|bi-weekly|quarterly"
_LOSS_PAT = r"mean squared error|mse|mean absolute error|mae|cross-entropy|log loss|hinge loss|squared loss|absolute error|mean bias"
_BEST_MODEL_PAT = r"best model|optimal model|most accurate|highest performing|top model|leading model|best-performing"

BASELINE_MODEL_NAME = "regex-baseline"


def _sentence_hits(pattern: str, text: str) -> str:
    return " ".join(re.findall(pattern + r".*?\.", text, re.IGNORECASE))


def _first_hit(pattern: str, text: str) -> str:
    m = re.search(pattern, text, re.IGNORECASE)
    return m.group(0) if m else ""


def regex_baseline(doc: Document, scope: str = "abstract") -> AnswerRecord:
    """Answer the five default questions by keyword search alone.

    Pure and idempotent: identical text gives an identical record.  The
    text examined is the title plus the scoped text, the same material a
    transport-backed run would see.
    """
    try:
        scoped = _scoped_text(doc, scope)
    except LitmineError:
        scoped = ""
    text = f"{doc.title}\n{scoped}"

    answers: dict[str, Answer] = {}

    if re.search(_COMPARISON_PAT, text, re.IGNORECASE):
        answers["comparison"] = Answer(VERDICT_YES, _sentence_hits(_COMPARISON_PAT, text))
    else:
        answers["comparison"] = Answer(VERDICT_NO)

    if re.search(_HPO_PAT, text, re.IGNORECASE):
        answers["hpo"] = Answer(VERDICT_YES, _sentence_hits(_HPO_PAT, text))
    else:
        answers["hpo"] = Answer(VERDICT_NO)

    frequency = _first_hit(_FREQUENCY_PAT, text)
    answers["frequency"] = Answer(VERDICT_YES if frequency else VERDICT_NO, frequency)

    loss = _first_hit(_LOSS_PAT, text)
    answers["loss"] = Answer(VERDICT_YES if loss else VERDICT_NO, loss)

    if re.search(_BEST_MODEL_PAT, text, re.IGNORECASE):
        answers["best_model"] = Answer(VERDICT_YES, _sentence_hits(_BEST_MODEL_PAT, text))
    else:
        answers["best_model"] = Answer(VERDICT_NO)

    return AnswerRecord(
        doc_id=doc.id,
        answers=answers,
        model=BASELINE_MODEL_NAME,
        scope=scope,
        attention_check_passed=True,
    )


def append_answer(path: str | Path, record: AnswerRecord) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_json_dict(), sort_keys=True, ensure_ascii=False))
        fh.write("\n")


def load_answers(path: str | Path) -> list[AnswerRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(AnswerRecord.from_json_dict(json.loads(line)))
    return records


def load_answer_map(path: str | Path) -> dict[str, AnswerRecord]:
    return {r.doc_id: r for r in load_answers(path)}


@dataclass
class ProtocolSummary:
    """Counts of what happened to each document during a protocol run."""

    total: int = 0
    stored: int = 0
    skipped_existing: int = 0
    too_large: int = 0
    unreadable: int = 0
    transport_failed: int = 0
    parse_failed: int = 0
    retries: int = 0

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "stored": self.stored,
            "skipped_existing": self.skipped_existing,
            "too_large": self.too_large,
            "unreadable": self.unreadable,
            "transport_failed": self.transport_failed,
            "parse_failed": self.parse_failed,
            "retries": self.retries,
        }


def _failed_record(doc: Document, qs: QuestionSet, model: str, scope: str, reason: str) -> AnswerRecord:
    return AnswerRecord(
        doc_id=doc.id,
        answers={q.key: Answer(VERDICT_FAILED) for q in qs},
        model=model,
        scope=scope,
        violations=(reason,),
    )


def run_protocol(
    docs: Iterable[Document],
    transport,
    store_path: str | Path,
    questions: QuestionSet | None = None,
    scope: str = "abstract",
    model: str = "",
    size_budget: int = SIZE_BUDGET,
    policy: RetryPolicy | None = None,
    resume: bool = False,
    log_path: str | Path | None = None,
) -> ProtocolSummary:
    """Ask every document the question set and append answers to a store.

    One request per document.  Oversized prompts are excluded locally and
    counted; transport failures after retries and unparseable responses
    are stored as all-failed records rather than dropped, so the store
    always accounts for every document it saw.  With ``resume`` the run
    skips documents already present in the store; without it the store
    must not already exist.
    """
    store_path = Path(store_path)
    if store_path.exists() and not resume:
        raise LitmineError(f"answer store {store_path} exists; pass resume to continue it")
    log_file = Path(log_path) if log_path else store_path.with_suffix(store_path.suffix + ".log.jsonl")
    qs = questions or QuestionSet.default()
    policy = policy or RetryPolicy()
    existing = set(load_answer_map(store_path)) if store_path.exists() else set()

    summary = ProtocolSummary()
    with open(log_file, "a", encoding="utf-8") as log:

        def log_line(doc_id: str, status: str, prompt: str | None, response: str | None, retries: int) -> None:
            entry = {
                "doc_id": doc_id,
                "status": status,
                "prompt_sha256": prompt_digest(prompt) if prompt is not None else None,
                "response_sha256": prompt_digest(response) if response is not None else None,
                "retries": retries,
            }
            log.write(json.dumps(entry, sort_keys=True) + "\n")

        for doc in docs:
            summary.total += 1
            if doc.id in existing:
                summary.skipped_existing += 1
                continue
            try:
                prompt = build_prompt(doc, scope=scope, questions=qs)
            except LitmineError:
                summary.unreadable += 1
                log_line(doc.id, "unreadable", None, None, 0)
                continue
            try:
                response = ask(transport, prompt, policy=policy, size_budget=size_budget)
            except PromptTooLargeError:
                summary.too_large += 1
                log_line(doc.id, "too-large", prompt, None, 0)
                continue
            except TransportError:
                summary.transport_failed += 1
                summary.retries += policy.last_retries
                record = _failed_record(doc, qs, model, scope, "transport-failed")
                append_answer(store_path, record)
                summary.stored += 1
                log_line(doc.id, "transport-failed", prompt, None, policy.last_retries)
                continue
            summary.retries += policy.last_retries
            try:
                record = parse_answer(response, questions=qs, doc_id=doc.id, model=model, scope=scope)
            except AnswerFormatError:
                summary.parse_failed += 1
                record = _failed_record(doc, qs, model, scope, "unparseable")
                append_answer(store_path, record)
                summary.stored += 1
                log_line(doc.id, "unparseable", prompt, response, policy.last_retries)
                continue
            append_answer(store_path, record)
            summary.stored += 1
            log_line(doc.id, "ok", prompt, response, policy.last_retries)

    return summary


def _binary(verdict: str) -> str:
    return "yes" if verdict == VERDICT_YES else "no"


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 verdict cross-tabulation of two answer sets on two questions.

    Cells are keyed by (axis1 verdict, axis2 verdict) in the fixed order
    (no,no), (no,yes), (yes,no), (yes,yes).  The difference column is
    set A minus set B, cell by cell; totals close the books: each set's
    cells sum to its record count.
    """

    axis1: str
    axis2: str
    cells_a: dict[tuple[str, str], int]
    cells_b: dict[tuple[str, str], int]

    @property
    def total_a(self) -> int:
        return sum(self.cells_a.values())

    @property
    def total_b(self) -> int:
        return sum(self.cells_b.values())

    def difference(self, cell: tuple[str, str]) -> int:
        return self.cells_a.get(cell, 0) - self.cells_b.get(cell, 0)

    @property
    def total_difference(self) -> int:
        return self.total_a - self.total_b

    def rows(self) -> list[tuple[str, int, int, int]]:
        out = []
        for cell in CELL_ORDER:
            label = f"{self.axis1}={cell[0]} & {self.axis2}={cell[1]}"
            out.append((label, self.cells_a.get(cell, 0), self.cells_b.get(cell, 0), self.difference(cell)))
        out.append(("Total", self.total_a, self.total_b, self.total_difference))
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "set_a", "set_b", "difference"])
            for row in self.rows():
                writer.writerow(row)


def compare_answers(
    set_a: Sequence[AnswerRecord],
    set_b: Sequence[AnswerRecord],
    axes: tuple[str, str] = ("hpo", "comparison"),
) -> ConfusionMatrix:
    """Cross-tabulate two answer sets on a pair of question keys.

    Sets need not cover the same documents; each contributes its own
    total.  Verdicts reduce to binary: anything other than a clean yes
    (no, not-applicable, failed) counts as no, since a 2x2 table has no
    third column.  Raises when a record lacks one of the axis keys.
    """
    axis1, axis2 = axes

    def tally(records: Sequence[AnswerRecord]) -> dict[tuple[str, str], int]:
        cells = {cell: 0 for cell in CELL_ORDER}
        for rec in records:
            v1 = _binary(rec.verdict(axis1))
            v2 = _binary(rec.verdict(axis2))
            cells[(v1, v2)] += 1
        return cells

    return ConfusionMatrix(
        axis1=axis1,
        axis2=axis2,
        cells_a=tally(set_a),
        cells_b=tally(set_b),
    )


def tally_verdicts(records: Sequence[AnswerRecord], keys: Sequence[str] | None = None) -> dict[str, Counter]:
    """Per-question verdict counts across a set of records."""
    if keys is None:
        keys = QuestionSet.default().keys()
    out: dict[str, Counter] = {k: Counter() for k in keys}
    for rec in records:
        for k in keys:
            out[k][rec.verdict(k)] += 1
    return out


def _normalize_alias(s: str) -> str:
    return " ".join(s.split()).casefold()


@lru_cache(maxsize=1)
def _frequency_bin_map() -> dict[str, str]:
    text = resources.files("litmine.data").joinpath("frequency_bins.json").read_text(encoding="utf-8")
    mapping: dict[str, str] = {}
    for bin_name, aliases in json.loads(text).items():
        for alias in aliases:
            mapping[_normalize_alias(alias)] = bin_name
    return mapping


@lru_cache(maxsize=1)
def _loss_group_map() -> dict[str, str]:
    text = resources.files("litmine.data").joinpath("loss_groups.json").read_text(encoding="utf-8")
    mapping: dict[str, str] = {}
    for group, aliases in json.loads(text).items():
        for alias in aliases:
            mapping[_normalize_alias(alias)] = group
    return mapping


def bin_frequency(answer: str) -> str:
    """Map a free-text data-frequency answer onto its coarse bin.

    Matching is exact after whitespace collapsing and case folding
    against the shipped alias lists; empty input and unknown strings land
    in NotSpecified, the latter with a warning.  Total: every input maps
    somewhere.
    """
    key = _normalize_alias(answer)
    if not key:
        return FALLBACK_FREQUENCY_BIN
    hit = _frequency_bin_map().get(key)
    if hit is not None:
        return hit
    warnings.warn(f"unrecognised data frequency {answer!r}; using {FALLBACK_FREQUENCY_BIN}", stacklevel=2)
    return FALLBACK_FREQUENCY_BIN


def group_loss(answer: str) -> str:
    """Map a free-text loss-function answer onto its named group."""
    key = _normalize_alias(answer)
    if not key:
        return FALLBACK_LOSS_GROUP
    return _loss_group_map().get(key, FALLBACK_LOSS_GROUP)


@lru_cache(maxsize=1)
def packaged_model_categories() -> tuple[str, ...]:
    text = resources.files("litmine.data").joinpath("model_categories.json").read_text(encoding="utf-8")
    return tuple(json.loads(text))


def _category_prompt(elaboration: str, categories: Sequence[str]) -> str:
    lines = [
        "Classify the following description of a best-performing model into",
        "exactly one of these categories:",
    ]
    lines += [f"- {c}" for c in categories]
    lines += [
        "",
        f"Description: {elaboration}",
        "",
        "Reply with the category name only, nothing else.",
    ]
    return "\n".join(lines)


def categorize_models(
    records: Sequence[AnswerRecord],
    transport,
    categories: Sequence[str] | None = None,
    policy: RetryPolicy | None = None,
    batch_size: int = 1,
) -> Counter:
    """Second-pass classification of best-model elaborations, one per request.

    The reply must match a category name exactly (after whitespace and
    case normalization); a mismatch gets one retry.  Records with no
    elaboration, exhausted retries, or transport failures are counted
    under the catch-all category rather than dropped.
    """
    if batch_size != 1:
        raise LitmineError("model categorization runs one record per request")
    cats = tuple(categories) if categories is not None else packaged_model_categories()
    canonical = {_normalize_alias(c): c for c in cats}
    policy = policy or RetryPolicy()

    counts: Counter = Counter()
    for rec in records:
        answer = rec.answers.get("best_model")
        elaboration = answer.elaboration.strip() if answer else ""
        if not elaboration:
            counts[FALLBACK_MODEL_CATEGORY] += 1
            continue
        prompt = _category_prompt(elaboration, cats)
        chosen = None
        for _ in range(2):
            try:
                raw = policy.call(lambda: transport.complete(prompt))
            except TransportError:
                break
            got = canonical.get(_normalize_alias(raw))
            if got is not None:
                chosen = got
                break
        counts[chosen if chosen is not None else FALLBACK_MODEL_CATEGORY] += 1
    return counts


def write_tally_csv(tallies: dict[str, Counter], path: str | Path) -> None:
    """Write per-question verdict counts as CSV rows question,yes,no,not_applicable,failed."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["question", "yes", "no", "not_applicable", "failed"])
        for key, counter in tallies.items():
            writer.writerow([
                key,
                counter.get(VERDICT_YES, 0),
                counter.get(VERDICT_NO, 0),
                counter.get(VERDICT_NA, 0),
                counter.get(VERDICT_FAILED, 0),
            ])


def write_bin_csv(counts: Counter, path: str | Path, value_column: str) -> None:
    """Write a category → count table, largest first, ties alphabetical."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([value_column, "count"])
        for name, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            writer.writerow([name, count])
