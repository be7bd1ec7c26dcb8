"""From-scratch HDBSCAN: density clustering with noise for layout points.

Stages, each exposed for independent testing:

1. core_distances     - distance to the min_samples-th neighbor (self
                        counts first), the local density proxy
2. mutual_reachability_mst - dense Prim over d_mreach(i, j) =
                        max(core_i, core_j, d(i, j))
3. condense_tree      - single-linkage dendrogram from the sorted MST,
                        pruned so only splits with both sides holding at
                        least min_cluster_size points create clusters;
                        smaller sides fall out as points
4. extract_clusters   - excess-of-mass selection on cluster stability
                        (lambda = 1/distance), bottom-up; unselected
                        points are noise (-1)

The root of the condensed tree competes like any other cluster when it
holds at least min_cluster_size points, so a lone tight blob comes back
as one cluster rather than all noise.  Everything is deterministic: ties
in Prim and in edge sorting resolve toward lower indices.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LitmineError
from .manifold import pairwise_distances


@dataclass(frozen=True)
class CondensedTree:
    """Pruned cluster hierarchy.

    Rows are (parent, child, lambda_val, child_size); cluster ids start
    at n_points (the root is exactly n_points), smaller ids are points.
    """

    n_points: int
    min_cluster_size: int
    parent: np.ndarray
    child: np.ndarray
    lambda_val: np.ndarray
    child_size: np.ndarray

    def cluster_ids(self) -> list[int]:
        ids = {self.n_points} | {
            int(c) for c in self.child if c >= self.n_points
        }
        return sorted(ids)

    def to_json_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "min_cluster_size": self.min_cluster_size,
            "rows": [
                {
                    "parent": int(p),
                    "child": int(c),
                    "lambda": float(lv) if np.isfinite(lv) else None,
                    "size": int(s),
                }
                for p, c, lv, s in zip(
                    self.parent, self.child, self.lambda_val, self.child_size
                )
            ],
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class ClusterLabels:
    """Final assignment: -1 noise, 0..K-1 clusters, plus stability scores."""

    labels: np.ndarray
    stability: dict[int, float] = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.stability)

    def sizes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for lb in self.labels:
            out[int(lb)] = out.get(int(lb), 0) + 1
        return out


def core_distances(Y: np.ndarray, min_samples: int) -> np.ndarray:
    """Euclidean distance to the min_samples-th nearest neighbor.

    The point itself counts as neighbor one, so min_samples=1 gives all
    zeros and min_samples=2 gives the nearest-other distance.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    if not 1 <= min_samples <= n:
        raise ValueError(f"need 1 <= min_samples <= n, got {min_samples}, n={n}")
    dist = pairwise_distances(Y, "euclidean")
    np.fill_diagonal(dist, 0.0)
    return np.sort(dist, axis=1)[:, min_samples - 1]


def mutual_reachability_mst(
    Y: np.ndarray, core: np.ndarray
) -> list[tuple[int, int, float]]:
    """Minimum spanning tree under mutual reachability, by dense Prim.

    d_mreach(i, j) = max(core_i, core_j, d(i, j)).  Returns n-1 edges
    (u, v, weight); ties resolve toward the lower point index because
    argmin takes the first minimum.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    core = np.asarray(core, dtype=np.float64)
    dist = pairwise_distances(Y, "euclidean")
    mreach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, np.inf)

    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    best = mreach[0].copy()
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        masked = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(masked))
        edges.append((int(best_from[nxt]), nxt, float(best[nxt])))
        in_tree[nxt] = True
        improved = mreach[nxt] < best
        improved &= ~in_tree
        best = np.where(improved, mreach[nxt], best)
        best_from = np.where(improved, nxt, best_from)
    return edges


class _UnionFind:
    """Union-find over dendrogram nodes; each set's root is its newest node."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(2 * n - 1))
        self.size = [1] * n + [0] * (n - 1)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def merge(self, x: int, y: int, new_node: int) -> None:
        rx, ry = self.find(x), self.find(y)
        self.parent[rx] = new_node
        self.parent[ry] = new_node
        self.size[new_node] = self.size[rx] + self.size[ry]


def _single_linkage(
    mst: list[tuple[int, int, float]], n: int
) -> np.ndarray:
    """Dendrogram rows (left, right, distance, size); node t is id n+t."""
    order = sorted(range(len(mst)), key=lambda e: (mst[e][2], mst[e][0], mst[e][1]))
    uf = _UnionFind(n)
    hierarchy = np.zeros((n - 1, 4), dtype=np.float64)
    for t, e in enumerate(order):
        u, v, w = mst[e]
        ru, rv = uf.find(u), uf.find(v)
        hierarchy[t, 0] = min(ru, rv)
        hierarchy[t, 1] = max(ru, rv)
        hierarchy[t, 2] = w
        hierarchy[t, 3] = uf.size[ru] + uf.size[rv]
        uf.merge(ru, rv, n + t)
    return hierarchy


def _bfs_nodes(hierarchy: np.ndarray, start: int, n: int) -> list[int]:
    out: list[int] = []
    queue = deque([start])
    while queue:
        node = queue.popleft()
        out.append(node)
        if node >= n:
            row = hierarchy[node - n]
            queue.append(int(row[0]))
            queue.append(int(row[1]))
    return out


def condense_tree(
    mst: list[tuple[int, int, float]], min_cluster_size: int
) -> CondensedTree:
    """Prune the single-linkage hierarchy into the condensed cluster tree.

    Walking the dendrogram down from the root: a split where both sides
    hold at least min_cluster_size points creates two child clusters at
    that split's lambda; otherwise the big side continues as the same
    cluster and the small side's points fall out individually, recorded
    at the split's lambda.
    """
    if min_cluster_size < 2:
        raise ValueError(f"min_cluster_size must be >= 2, got {min_cluster_size}")
    n = len(mst) + 1
    hierarchy = _single_linkage(mst, n)
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    ignore: set[int] = set()
    rows: list[tuple[int, int, float, int]] = []

    for node in _bfs_nodes(hierarchy, root, n):
        if node in ignore or node < n:
            continue
        row = hierarchy[node - n]
        left, right, dist = int(row[0]), int(row[1]), float(row[2])
        lam = 1.0 / dist if dist > 0.0 else np.inf
        left_count = int(hierarchy[left - n][3]) if left >= n else 1
        right_count = int(hierarchy[right - n][3]) if right >= n else 1
        label = relabel[node]

        if left_count >= min_cluster_size and right_count >= min_cluster_size:
            relabel[left] = next_label
            rows.append((label, next_label, lam, left_count))
            next_label += 1
            relabel[right] = next_label
            rows.append((label, next_label, lam, right_count))
            next_label += 1
        elif left_count < min_cluster_size and right_count < min_cluster_size:
            for side in (left, right):
                for sub in _bfs_nodes(hierarchy, side, n):
                    if sub < n:
                        rows.append((label, sub, lam, 1))
                    ignore.add(sub)
        else:
            small, big = (left, right) if left_count < right_count else (right, left)
            relabel[big] = label
            for sub in _bfs_nodes(hierarchy, small, n):
                if sub < n:
                    rows.append((label, sub, lam, 1))
                ignore.add(sub)

    arr = np.array(rows, dtype=np.float64).reshape(len(rows), 4)
    return CondensedTree(
        n_points=n,
        min_cluster_size=min_cluster_size,
        parent=arr[:, 0].astype(np.int64),
        child=arr[:, 1].astype(np.int64),
        lambda_val=arr[:, 2],
        child_size=arr[:, 3].astype(np.int64),
    )


def _compute_stability(tree: CondensedTree) -> dict[int, float]:
    """stability(c) = sum over child rows of (lambda - lambda_birth(c)) * size."""
    births: dict[int, float] = {tree.n_points: 0.0}
    for c, lv in zip(tree.child, tree.lambda_val):
        if c >= tree.n_points:
            births[int(c)] = float(lv)
    stability: dict[int, float] = {c: 0.0 for c in tree.cluster_ids()}
    for p, lv, s in zip(tree.parent, tree.lambda_val, tree.child_size):
        birth = births[int(p)]
        lam = float(lv)
        if np.isinf(lam) and np.isinf(birth):
            continue  # duplicate points born and lost at lambda=inf: no mass
        stability[int(p)] += (lam - birth) * int(s)
    return stability


def extract_clusters(tree: CondensedTree) -> ClusterLabels:
    """Excess-of-mass selection over the condensed tree.

    Bottom-up, a node keeps its children when their summed stability
    strictly exceeds its own; otherwise it claims the whole subtree.
    The root competes only when it holds at least min_cluster_size
    points.  Selected clusters are renumbered 0..K-1 in tree order;
    everything else is noise.
    """
    stability = _compute_stability(tree)
    cluster_children: dict[int, list[int]] = {}
    for p, c in zip(tree.parent, tree.child):
        if c >= tree.n_points:
            cluster_children.setdefault(int(p), []).append(int(c))

    root = tree.n_points
    root_eligible = tree.n_points >= tree.min_cluster_size
    node_list = sorted(stability, reverse=True)
    if not root_eligible:
        node_list = [c for c in node_list if c != root]

    is_cluster = {c: True for c in node_list}
    for node in node_list:
        children = cluster_children.get(node, [])
        subtree = sum(stability[c] for c in children)
        if subtree > stability[node]:
            is_cluster[node] = False
            stability[node] = subtree
        else:
            # claim the subtree: deselect every descendant cluster
            queue = deque(children)
            while queue:
                c = queue.popleft()
                if c in is_cluster:
                    is_cluster[c] = False
                queue.extend(cluster_children.get(c, []))

    selected = sorted(c for c, keep in is_cluster.items() if keep)
    label_map = {c: i for i, c in enumerate(selected)}

    parent_of: dict[int, int] = {}
    for p, c in zip(tree.parent, tree.child):
        if c >= tree.n_points:
            parent_of[int(c)] = int(p)

    # deselected clusters flow upward into their nearest selected ancestor
    up_cache: dict[int, int] = {}

    def resolve(cluster: int) -> int:
        chain = []
        cur = cluster
        while cur not in label_map and cur in parent_of:
            chain.append(cur)
            cur = parent_of[cur]
        target = cur if cur in label_map else -1
        for node in chain:
            up_cache[node] = target
        up_cache[cluster] = target
        return target

    labels = np.full(tree.n_points, -1, dtype=np.int64)
    for p, c in zip(tree.parent, tree.child):
        if c < tree.n_points:
            anchor = int(p)
            target = up_cache.get(anchor)
            if target is None:
                target = resolve(anchor)
            if target in label_map:
                labels[int(c)] = label_map[target]

    final_stability = {label_map[c]: float(stability[c]) for c in selected}
    return ClusterLabels(labels=labels, stability=final_stability)


def hdbscan(
    Y: np.ndarray,
    min_cluster_size: int = 15,
    min_samples: int | None = None,
) -> tuple[ClusterLabels, CondensedTree]:
    """Full pipeline: core distances, MST, condensed tree, extraction."""
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    if min_samples is None:
        min_samples = min(min_cluster_size, n)
    core = core_distances(Y, min_samples)
    mst = mutual_reachability_mst(Y, core)
    tree = condense_tree(mst, min_cluster_size)
    labels = extract_clusters(tree)
    return labels, tree


def write_labels_csv(ids, labels: ClusterLabels, path: str | Path) -> None:
    """Emit `id,topic_label,probability_placeholder` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "topic_label", "probability_placeholder"])
        for doc_id, lb in zip(ids, labels.labels):
            placeholder = 1.0 if int(lb) >= 0 else 0.0
            writer.writerow([doc_id, int(lb), placeholder])


def read_labels_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a labels CSV back into (ids, label array)."""
    ids: list[str] = []
    labels: list[int] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["id", "topic_label"]:
            raise LitmineError(f"{path}: not a labels CSV")
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            labels.append(int(row[1]))
    return ids, np.asarray(labels, dtype=np.int64)
