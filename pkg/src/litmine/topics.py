"""Topic construction over cluster labels: c-TF-IDF terms, merging,
trends, query matching, hierarchy, and LLM titling.

A topic is the concatenation of its member documents.  Terms are scored
with a class-based TF-IDF,

    score(t, c) = tf(t, c) * log(1 + A / f(t))

where tf(t, c) is t's count in class c normalized by the class's total
term count, f(t) is t's summed count over all classes, and A is the
average term count per class.  Merging repeatedly folds the smallest
topic into its nearest neighbor by Euclidean distance between reduced-
space centroids, so small fringe topics drain into big thematic ones.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import Counter
from collections.abc import Callable, Iterable
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import Document
from .embeddings import EmbeddingMatrix, cosine
from .errors import LitmineError
from .textstats import PreprocessConfig, preprocess
from .transports import RetryPolicy

NOISE_TOPIC = -1
DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class TopicInfo:
    id: int
    size: int
    top_terms: tuple[tuple[str, float], ...]
    centroid_reduced: np.ndarray
    centroid_embedding: np.ndarray
    title: str | None = None


@dataclass(frozen=True)
class TopicModel:
    """Immutable topic assignment plus per-topic summaries."""

    doc_ids: tuple[str, ...]
    labels: np.ndarray  # per-document topic id, NOISE_TOPIC for outliers
    topics: dict[int, TopicInfo]
    term_counts: dict[int, Counter]
    top_k: int

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def topic_ids(self, include_noise: bool = False) -> list[int]:
        ids = sorted(t for t in self.topics if t != NOISE_TOPIC)
        if include_noise and NOISE_TOPIC in self.topics:
            ids.append(NOISE_TOPIC)
        return ids

    def size_of(self, topic: int) -> int:
        return self.topics[topic].size


def ctfidf(
    term_counts_per_topic: dict[int, Counter],
    avg_terms_per_class: float | None = None,
) -> dict[int, dict[str, float]]:
    """Class-based TF-IDF scores for every (class, term) pair.

    ``avg_terms_per_class`` defaults to the actual average total term
    count over the given classes.  Classes with zero terms are skipped
    with a warning since tf is undefined there.
    """
    totals = {c: sum(counts.values()) for c, counts in term_counts_per_topic.items()}
    nonempty = {c for c, t in totals.items() if t > 0}
    for c in term_counts_per_topic:
        if c not in nonempty:
            warnings.warn(f"class {c} has no terms; skipped in c-TF-IDF", stacklevel=2)
    if not nonempty:
        return {}
    if avg_terms_per_class is None:
        avg_terms_per_class = sum(totals[c] for c in nonempty) / len(nonempty)

    freq: Counter = Counter()
    for c in nonempty:
        freq.update(term_counts_per_topic[c])

    scores: dict[int, dict[str, float]] = {}
    for c in nonempty:
        class_total = totals[c]
        scores[c] = {
            term: (count / class_total) * math.log(1.0 + avg_terms_per_class / freq[term])
            for term, count in term_counts_per_topic[c].items()
        }
    return scores


def _top_terms(scores: dict[str, float], top_k: int) -> tuple[tuple[str, float], ...]:
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(ranked[:top_k])


def _document_text(doc: Document) -> str:
    return f"{doc.title} {doc.abstract}"


def build_topics(
    labels: np.ndarray,
    docs: Iterable[Document],
    embeddings: EmbeddingMatrix,
    layout: np.ndarray,
    top_k: int = DEFAULT_TOP_K,
    config: PreprocessConfig | None = None,
) -> TopicModel:
    """Group documents by cluster label and summarize each group.

    Documents, embeddings, and layout rows must be aligned: doc i maps
    to labels[i], embeddings row for its id, and layout[i].
    """
    doc_list = list(docs)
    labels = np.asarray(labels, dtype=np.int64)
    if len(doc_list) != len(labels) or len(doc_list) != layout.shape[0]:
        raise LitmineError(
            f"alignment mismatch: {len(doc_list)} docs, {len(labels)} labels, "
            f"{layout.shape[0]} layout rows"
        )
    doc_ids = tuple(d.id for d in doc_list)
    emb = embeddings.subset(doc_ids)
    if config is None:
        config = PreprocessConfig.default()

    members: dict[int, list[int]] = {}
    for i, lb in enumerate(labels):
        members.setdefault(int(lb), []).append(i)

    term_counts: dict[int, Counter] = {}
    for topic, idxs in members.items():
        counts: Counter = Counter()
        for i in idxs:
            counts.update(preprocess(_document_text(doc_list[i]), config))
        term_counts[topic] = counts

    scores = ctfidf(term_counts)
    topics: dict[int, TopicInfo] = {}
    for topic, idxs in members.items():
        rows = np.array(idxs, dtype=np.int64)
        topics[topic] = TopicInfo(
            id=topic,
            size=len(idxs),
            top_terms=_top_terms(scores.get(topic, {}), top_k),
            centroid_reduced=layout[rows].mean(axis=0),
            centroid_embedding=np.asarray(emb.vectors)[rows].mean(axis=0),
        )
    return TopicModel(
        doc_ids=doc_ids,
        labels=labels.copy(),
        topics=topics,
        term_counts=term_counts,
        top_k=top_k,
    )


def merge_topics(model: TopicModel, target_count: int) -> TopicModel:
    """Fold smallest topics into their nearest neighbors until target_count.

    Each step merges the globally smallest non-noise topic (ties toward
    the lower id) into the non-noise topic whose reduced-space centroid
    is nearest (again ties toward the lower id).  Centroids are combined
    as size-weighted means, term counts add, and c-TF-IDF terms are
    recomputed at the end over the merged classes.
    """
    if target_count < 1:
        raise ValueError(f"target_count must be >= 1, got {target_count}")
    active = {t: model.topics[t] for t in model.topic_ids()}
    if len(active) < target_count:
        raise ValueError(
            f"cannot merge {len(active)} topics up to {target_count}"
        )
    if len(active) == target_count:
        return model
    sizes = {t: info.size for t, info in active.items()}
    reduced = {t: np.array(info.centroid_reduced, dtype=np.float64) for t, info in active.items()}
    embed = {t: np.array(info.centroid_embedding, dtype=np.float64) for t, info in active.items()}
    counts = {t: Counter(model.term_counts[t]) for t in active}
    assign = {t: t for t in active}  # original topic -> surviving topic

    while len(sizes) > target_count:
        smallest = min(sizes, key=lambda t: (sizes[t], t))
        others = [t for t in sizes if t != smallest]
        nearest = min(
            others,
            key=lambda t: (float(np.linalg.norm(reduced[smallest] - reduced[t])), t),
        )
        ns, nn = sizes[smallest], sizes[nearest]
        total = ns + nn
        reduced[nearest] = (ns * reduced[smallest] + nn * reduced[nearest]) / total
        embed[nearest] = (ns * embed[smallest] + nn * embed[nearest]) / total
        counts[nearest] = counts[nearest] + counts[smallest]
        sizes[nearest] = total
        for orig, cur in assign.items():
            if cur == smallest:
                assign[orig] = nearest
        del sizes[smallest], reduced[smallest], embed[smallest], counts[smallest]

    # final ids: 0..K-1 by size descending, ties by surviving id
    survivors = sorted(sizes, key=lambda t: (-sizes[t], t))
    final_id = {t: i for i, t in enumerate(survivors)}

    new_labels = model.labels.copy()
    for i, lb in enumerate(model.labels):
        lb = int(lb)
        if lb != NOISE_TOPIC:
            new_labels[i] = final_id[assign[lb]]

    term_counts: dict[int, Counter] = {final_id[t]: counts[t] for t in survivors}
    if NOISE_TOPIC in model.term_counts:
        term_counts[NOISE_TOPIC] = Counter(model.term_counts[NOISE_TOPIC])
    scores = ctfidf(term_counts)

    topics: dict[int, TopicInfo] = {}
    for t in survivors:
        nid = final_id[t]
        topics[nid] = TopicInfo(
            id=nid,
            size=sizes[t],
            top_terms=_top_terms(scores.get(nid, {}), model.top_k),
            centroid_reduced=reduced[t],
            centroid_embedding=embed[t],
        )
    if NOISE_TOPIC in model.topics:
        noise = model.topics[NOISE_TOPIC]
        topics[NOISE_TOPIC] = replace(
            noise, top_terms=_top_terms(scores.get(NOISE_TOPIC, {}), model.top_k)
        )
    return TopicModel(
        doc_ids=model.doc_ids,
        labels=new_labels,
        topics=topics,
        term_counts=term_counts,
        top_k=model.top_k,
    )


@dataclass
class TopicTrend:
    """Document counts per (year, topic)."""

    topics: list[int]
    counts: dict[tuple[int, int], int]

    def years(self) -> list[int]:
        return sorted({y for y, _ in self.counts})

    def get(self, year: int, topic: int) -> int:
        return self.counts.get((year, topic), 0)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["year", "topic", "count"])
            for year in self.years():
                for topic in self.topics:
                    writer.writerow([year, topic, self.get(year, topic)])


def topic_trends(model: TopicModel, docs: Iterable[Document]) -> TopicTrend:
    """Per-year document counts for every topic, noise included."""
    by_id = {d.id: d for d in docs}
    counts: dict[tuple[int, int], int] = {}
    for doc_id, lb in zip(model.doc_ids, model.labels):
        doc = by_id.get(doc_id)
        if doc is None or not doc.has_year:
            continue
        key = (doc.year, int(lb))
        counts[key] = counts.get(key, 0) + 1
    topic_order = model.topic_ids(include_noise=True)
    return TopicTrend(topics=topic_order, counts=counts)


@dataclass(frozen=True)
class QueryMatch:
    query: str
    ranking: tuple[tuple[int, float], ...]  # (topic id, similarity), sorted desc

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query", "rank", "topic", "similarity"])
            for rank, (topic, sim) in enumerate(self.ranking, start=1):
                writer.writerow([self.query, rank, topic, f"{sim:.6f}"])


def match_query(
    model: TopicModel,
    query: str,
    embedder: Callable[[str], np.ndarray],
) -> QueryMatch:
    """Rank topics by cosine similarity to the embedded query."""
    qvec = np.asarray(embedder(query), dtype=np.float64)
    pairs: list[tuple[int, float]] = []
    for t in model.topic_ids():
        centroid = model.topics[t].centroid_embedding
        if qvec.shape != centroid.shape:
            raise LitmineError(
                f"query dim {qvec.shape} vs topic centroid dim {centroid.shape}"
            )
        pairs.append((t, cosine(qvec, centroid)))
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return QueryMatch(query=query, ranking=tuple(pairs))


def topic_hierarchy(model: TopicModel) -> list[tuple[int, int, float, int]]:
    """Average-linkage agglomeration over cosine distance of centroids.

    Returns merge rows (id_a, id_b, height, merged_size); leaves carry
    their topic ids and every new internal node takes the next id after
    the largest leaf, in merge order.
    """
    leaves = model.topic_ids()
    if len(leaves) < 2:
        raise ValueError("hierarchy needs at least 2 topics")
    centroids = {t: model.topics[t].centroid_embedding for t in leaves}
    sizes = {t: 1 for t in leaves}
    dist: dict[tuple[int, int], float] = {}
    for i, a in enumerate(leaves):
        for b in leaves[i + 1 :]:
            dist[(a, b)] = 1.0 - cosine(centroids[a], centroids[b])

    next_id = max(leaves) + 1
    merges: list[tuple[int, int, float, int]] = []
    active = list(leaves)
    while len(active) > 1:
        best = min(
            ((a, b) for i, a in enumerate(active) for b in active[i + 1 :]),
            key=lambda p: (dist[p], p),
        )
        a, b = best
        height = dist[(a, b)]
        merged_size = sizes[a] + sizes[b]
        merges.append((a, b, height, merged_size))
        # average linkage: distance to the union is the size-weighted mean
        for other in active:
            if other in (a, b):
                continue
            da = dist[(min(a, other), max(a, other))]
            db = dist[(min(b, other), max(b, other))]
            dist[(min(other, next_id), max(other, next_id))] = (
                sizes[a] * da + sizes[b] * db
            ) / merged_size
        sizes[next_id] = merged_size
        active = [t for t in active if t not in (a, b)] + [next_id]
        next_id += 1
    return merges


def write_hierarchy_json(merges: list[tuple[int, int, float, int]], path: str | Path) -> None:
    rows = [
        {"a": a, "b": b, "height": height, "size": size} for a, b, height, size in merges
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")


_TITLE_PROMPT = """You are naming topics found in a corpus of research papers.
The topic below is described by its highest-scoring terms, best first.

{terms}

Reply with a title of exactly three words for this topic. No punctuation,
no quotes, nothing but the three words."""


def label_topic(
    top_terms: Iterable[tuple[str, float]],
    transport,
    policy: RetryPolicy | None = None,
) -> str:
    """Ask the LLM for a 3-word title; fall back to the top terms.

    A response that is not exactly three words gets one retry; if that
    also misbehaves, the title is the top three terms joined, so the
    pipeline never stalls on a chatty model.
    """
    terms = list(top_terms)[:10]
    if not terms:
        raise ValueError("cannot title a topic with no terms")
    if policy is None:
        policy = RetryPolicy()
    term_lines = "\n".join(f"- {term} ({score:.4f})" for term, score in terms)
    prompt = _TITLE_PROMPT.format(terms=term_lines)
    for _ in range(2):
        response = str(policy.call(lambda: transport.complete(prompt))).strip()
        words = response.split()
        if len(words) == 3:
            return " ".join(words)
    return " ".join(term for term, _ in terms[:3])


def write_topic_report(model: TopicModel, path: str | Path) -> None:
    """Emit per-topic JSON: {id, size, title, top_terms:[{term, score}]}."""
    report = []
    for t in model.topic_ids(include_noise=True):
        info = model.topics[t]
        report.append(
            {
                "id": info.id,
                "size": info.size,
                "title": info.title,
                "top_terms": [
                    {"term": term, "score": score} for term, score in info.top_terms
                ],
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
