"""
Keyword filtering and descriptive statistics
============================================

Builds a small synthetic corpus of abstracts, keeps the documents that
mention a trading-strategy keyword, and prints the per-keyword frequency
table together with a few corpus statistics: frequent bigrams, a
model-family trend series, and the yearly share the filtered set holds
in the full collection.

Run with:  python3 demos/01_filter_and_trends.py
"""

from collections import Counter

from litmine.corpus import Document
from litmine.filtering import filter_corpus, packaged_patterns
from litmine.textstats import (
    ngrams,
    packaged_taxonomy,
    preprocess,
    taxonomy_trends,
    yearly_share,
)

# ------------------------------------------------------------------
# A corpus small enough to check by eye.  Half the documents mention a
# strategy keyword; the other half are decoys that must not survive.

TOPICAL = [
    "Algorithmic trading with recurrent networks",
    "Momentum strategies in emerging markets",
    "Pair trading under transaction costs",
    "High-frequency trading and order flow",
    "Volatility trading with LSTM forecasts",
    "Benchmark strategies for crypto portfolios",
]
DECOYS = [
    "Corporate governance and board diversity",
    "Supply chain resilience after shocks",
    "Consumer sentiment surveys revisited",
    "Monetary policy transmission channels",
    "Labor market frictions in recessions",
    "Housing price bubbles and credit",
]

docs = []
for i in range(36):
    topical = i % 2 == 0
    title = (TOPICAL if topical else DECOYS)[(i // 2) % 6]
    body = (
        f"{title}. We study {'a random forest and an LSTM' if i % 4 == 0 else 'a linear model'} "
        f"on market data sampled between 2010 and 2020."
    )
    docs.append(Document(id=f"doc-{i:02d}", title=title, abstract=body, year=2015 + i % 6))

# ------------------------------------------------------------------
# Filter on the packaged keyword patterns and show what survived.

filtered, table = filter_corpus(docs, packaged_patterns())
print(f"kept {len(filtered)} of {len(docs)} documents\n")

print(f"{'label':<32} {'abstract':>8} {'title':>6} {'both':>6}")
for label in table.labels:
    a, t, b = table.row(label)
    if b:
        print(f"{label:<32} {a:>8} {t:>6} {b:>6}")
a, t, b = table.totals()
print(f"{'SUM':<32} {a:>8} {t:>6} {b:>6}\n")

# ------------------------------------------------------------------
# Frequent bigrams over the filtered abstracts, stopwords removed.

grams: Counter = Counter()
for doc in filtered:
    tokens = preprocess(f"{doc.title} {doc.abstract}")
    grams.update(ngrams(tokens, 2))
print("top bigrams:")
for gram, count in grams.most_common(5):
    print(f"  {' '.join(gram):<28} {count}")
print()

# ------------------------------------------------------------------
# Which model families appear, year by year.

trends = taxonomy_trends(filtered, packaged_taxonomy("model_families"))
years = trends.years()
print(f"{'family':<18}" + "".join(f"{y:>6}" for y in years))
for category in trends.categories:
    row = [trends.counts.get((y, category), 0) for y in years]
    print(f"{category:<18}" + "".join(f"{c:>6}" for c in row))
print()

# ------------------------------------------------------------------
# Share of the full collection captured by the filter, in basis points.

universe = Counter(d.year for d in docs)
subset = Counter(d.year for d in filtered)
for year, bps in yearly_share(dict(subset), dict(universe)).items():
    print(f"{year}: {bps:7.1f} bps")
