"""
Topic summaries, merging, trends, and query matching
====================================================

Continues where the clustering demo leaves off: documents are grouped,
then each group is summarised by its class-based tf-idf terms.  The
script merges the smallest topic away, prints per-year topic counts,
ranks topics against a free-text query, and shows the agglomeration
order of the topic hierarchy.

Run with:  python3 demos/03_topic_modeling.py
"""

import numpy as np

from litmine.corpus import Document
from litmine.embeddings import fallback_embed
from litmine.topics import (
    build_topics,
    match_query,
    merge_topics,
    topic_hierarchy,
    topic_trends,
)

VOCAB = {
    0: ("liquidity", "spread", "quote", "depth"),
    1: ("momentum", "reversal", "winner", "loser"),
    2: ("option", "hedge", "vega", "gamma"),
    3: ("forecast", "horizon", "error", "window"),
}
SIZES = {0: 10, 1: 8, 2: 7, 3: 4}

docs, labels = [], []
for t, words in VOCAB.items():
    for i in range(SIZES[t]):
        text = " ".join(words[(i + j) % len(words)] for j in range(5))
        docs.append(
            Document(id=f"t{t}-{i:02d}", title=words[0], abstract=text, year=2018 + (i % 3))
        )
        labels.append(t)
labels = np.asarray(labels)

emb = fallback_embed([f"{d.title} {d.abstract}" for d in docs], dim=64, ids=[d.id for d in docs])
rng = np.random.default_rng(0)
layout = np.asarray([[t * 5.0, 0.0] for t in labels]) + rng.normal(0.0, 0.3, (len(docs), 2))

model = build_topics(labels, docs, emb, layout, top_k=3)

print("topics and their top terms:")
for t in model.topic_ids():
    terms = ", ".join(term for term, _ in model.topics[t].top_terms)
    print(f"  topic {t} ({model.size_of(t)} docs): {terms}")

# ------------------------------------------------------------------
# Merge the smallest topic into its nearest layout neighbour.

merged = merge_topics(model, 3)
print("\nafter merging down to 3:")
for t in merged.topic_ids():
    terms = ", ".join(term for term, _ in merged.topics[t].top_terms)
    print(f"  topic {t} ({merged.size_of(t)} docs): {terms}")

# ------------------------------------------------------------------
# Topic activity per publication year.

trend = topic_trends(merged, docs)
years = trend.years()
print(f"\n{'topic':<8}" + "".join(f"{y:>6}" for y in years))
for t in merged.topic_ids():
    row = [trend.counts.get((y, t), 0) for y in years]
    print(f"{t:<8}" + "".join(f"{c:>6}" for c in row))

# ------------------------------------------------------------------
# Which topic does a query land on?

def embed_query(q: str) -> np.ndarray:
    return fallback_embed([q], dim=64).vectors[0]

for query in ("momentum and reversal effects", "option hedging with gamma"):
    ranking = match_query(merged, query, embed_query).ranking
    best, sim = ranking[0]
    print(f"\nquery {query!r}: topic {best} (similarity {sim:.3f})")

# ------------------------------------------------------------------
# Agglomeration order over the unmerged model's centroids.

print("\nhierarchy merge order:")
for a, b, height, size in topic_hierarchy(model):
    print(f"  {a} + {b} at height {height:.3f} -> {size} docs")
