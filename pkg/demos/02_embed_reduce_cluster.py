"""
Embeddings, 2-D layout, and density clustering
==============================================

Three groups of documents with disjoint vocabularies are embedded with
the deterministic fallback embedder, projected to the plane, and
clustered.  The script prints the cluster assignment counts and the
average within-group versus between-group layout distance, which is the
quick sanity check that the projection kept the groups apart.

Run with:  python3 demos/02_embed_reduce_cluster.py
"""

import numpy as np

from litmine.clustering import hdbscan
from litmine.corpus import Document
from litmine.embeddings import fallback_embed
from litmine.manifold import pairwise_distances, umap

# ------------------------------------------------------------------
# Documents: each group cycles through its own small vocabulary.

GROUPS = {
    0: ("liquidity", "spread", "quote", "depth"),
    1: ("momentum", "reversal", "winner", "loser"),
    2: ("option", "hedge", "delta", "gamma"),
}

docs, group_of = [], []
for g, words in GROUPS.items():
    for i in range(12):
        text = " ".join(words[(i + j) % len(words)] for j in range(6))
        docs.append(Document(id=f"g{g}-{i:02d}", title=words[0], abstract=text))
        group_of.append(g)
group_of = np.asarray(group_of)

# ------------------------------------------------------------------
# Hash-based embeddings need no network and are fully reproducible.

emb = fallback_embed([f"{d.title} {d.abstract}" for d in docs], dim=64, ids=[d.id for d in docs])
print(f"embedded {len(emb.ids)} documents at dim {emb.vectors.shape[1]}")

result = umap(emb.vectors, k=8, k_out=2, epochs=100, seed=0)
print(f"layout initialised via {result.init_mode} init")

labels, tree = hdbscan(result.layout, min_cluster_size=6)
noise = int((labels.labels < 0).sum())
print(f"found {labels.n_clusters} clusters, {noise} noise points\n")

# ------------------------------------------------------------------
# Cross-tabulate found clusters against the planted groups.

print("cluster sizes by planted group:")
for cluster in sorted(set(labels.labels.tolist())):
    members = group_of[labels.labels == cluster]
    tag = "noise" if cluster < 0 else f"cluster {cluster}"
    counts = {g: int((members == g).sum()) for g in GROUPS if (members == g).any()}
    print(f"  {tag:<10} {counts}")

d = pairwise_distances(result.layout, "euclidean")
same = d[group_of[:, None] == group_of[None, :]]
cross = d[group_of[:, None] != group_of[None, :]]
print(f"\nmean layout distance within groups: {same.mean():.2f}")
print(f"mean layout distance across groups: {cross.mean():.2f}")
