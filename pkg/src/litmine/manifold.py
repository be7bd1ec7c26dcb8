"""From-scratch UMAP: k-NN graph, fuzzy simplicial set, curve fit, layout.

The construction follows the standard recipe.  For every point, rho is
the distance to its nearest neighbor and sigma solves

    sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = target    (= log2 k)

by bisection.  Directed weights exp(-max(0, d - rho)/sigma) are fused
with w = a + b - a*b into a symmetric graph.  The low-dimensional
similarity family 1/(1 + a*d^(2b)) is fitted to a piecewise target
controlled by (min_dist, spread), and the layout is optimized by
sequential stochastic gradient descent over edges: attraction along
sampled edges, repulsion against uniformly drawn negative samples,
per-coordinate gradients clipped to [-4, 4], learning rate decaying
linearly to zero.  All randomness is pre-drawn per epoch from one seeded
generator, so a run is a pure function of (input, params, seed).

The SGD inner loop is compiled with numba when available; the pure
Python fallback performs the identical arithmetic in the same order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Sequence

import numpy as np
from scipy.linalg import eigh

from .embeddings import EmbeddingMatrix
from .errors import ConvergenceError, LayoutError

DEFAULT_K = 15
DEFAULT_K_OUT = 5
DEFAULT_MIN_DIST = 0.1
DEFAULT_SPREAD = 1.0
DEFAULT_EPOCHS = 200
DEFAULT_NEG_SAMPLES = 5

_BISECT_ITERS = 64
_SIGMA_TOL = 1e-3
_GRAD_CLIP = 4.0
_CURVE_GRID_POINTS = 300


@dataclass(frozen=True)
class NeighborGraph:
    """Exact k nearest neighbors per point, distances sorted ascending."""

    indices: np.ndarray  # (n, k) int
    distances: np.ndarray  # (n, k) float

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric weighted graph over points; weights in (0, 1]."""

    n: int
    edges_i: np.ndarray  # (m,) int, edges_i < edges_j
    edges_j: np.ndarray
    weights: np.ndarray  # (m,) float
    rho: np.ndarray  # (n,)
    sigma: np.ndarray  # (n,)

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        parent = list(range(self.n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in zip(self.edges_i, self.edges_j):
            ri, rj = find(int(i)), find(int(j))
            if ri != rj:
                parent[ri] = rj
        return len({find(i) for i in range(self.n)}) == 1


@dataclass(frozen=True)
class UmapResult:
    layout: np.ndarray  # (n, k_out)
    init_mode: str  # "spectral" or "random"
    params: dict


def _as_array(X: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    if isinstance(X, EmbeddingMatrix):
        return np.asarray(X.vectors, dtype=np.float64)
    return np.asarray(X, dtype=np.float64)


def pairwise_distances(X: np.ndarray, metric: str) -> np.ndarray:
    """Dense all-pairs distances under cosine_distance or euclidean."""
    X = np.asarray(X, dtype=np.float64)
    if metric == "euclidean":
        sq = np.sum(X * X, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)
    if metric == "cosine_distance":
        norms = np.linalg.norm(X, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        U = X / safe[:, None]
        sim = np.clip(U @ U.T, -1.0, 1.0)
        return 1.0 - sim
    raise ValueError(f"unknown metric {metric!r}")


def knn_graph(
    X: EmbeddingMatrix | np.ndarray,
    k: int = DEFAULT_K,
    metric: str = "cosine_distance",
) -> NeighborGraph:
    """Exact k nearest neighbors; ties broken toward the lower index."""
    arr = _as_array(X)
    n = arr.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    dist = pairwise_distances(arr, metric)
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps equal distances ordered by index
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    return NeighborGraph(indices=order, distances=dist[rows, order])


def _solve_sigma(row: np.ndarray, rho: float, target: float) -> float:
    """Bisection for sigma in sum_j exp(-max(0, d_j - rho)/sigma) = target.

    The sum increases from the count of neighbors at distance <= rho up
    to k as sigma grows.  When no root exists (the low end already
    exceeds the target) the bracket collapses toward zero and the lower
    clamp is returned; a bracketed root that still misses the tolerance
    after 64 halvings is a genuine failure.
    """
    shifted = np.maximum(row - rho, 0.0)

    def total(sigma: float) -> float:
        return float(np.exp(-shifted / sigma).sum())

    lo, hi = 0.0, 1.0
    grow = 0
    while total(hi) < target and grow < _BISECT_ITERS:
        hi *= 2.0
        grow += 1
    floor = max(np.mean(row) * 1e-3, 1e-12)
    for _ in range(_BISECT_ITERS):
        mid = (lo + hi) / 2.0
        if mid <= 0.0:
            break
        if total(mid) > target:
            hi = mid
        else:
            lo = mid
    sigma = max((lo + hi) / 2.0, floor)
    return sigma


def fuzzy_graph(g: NeighborGraph, target: float | None = None) -> FuzzyGraph:
    """Locally adaptive exponential weights, fused symmetrically.

    Each point's nearest neighbor gets directed weight exactly 1 (the
    kernel is flat inside rho); fusion w = a + b - a*b keeps weights in
    (0, 1] and the matrix symmetric.
    """
    n, k = g.n, g.k
    if target is None:
        target = math.log2(k) if k > 1 else 1.0
    rho = g.distances[:, 0].astype(np.float64).copy()
    sigma = np.empty(n, dtype=np.float64)
    for i in range(n):
        sigma[i] = _solve_sigma(g.distances[i], rho[i], target)
        achieved = float(np.exp(-np.maximum(g.distances[i] - rho[i], 0.0) / sigma[i]).sum())
        low_end = float(np.sum(g.distances[i] <= rho[i]))
        if abs(achieved - target) > _SIGMA_TOL and low_end <= target <= k:
            raise ConvergenceError(
                f"sigma bisection failed for point {i}: reached {achieved:.6f}, "
                f"target {target:.6f}"
            )

    directed = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        w = np.exp(-np.maximum(g.distances[i] - rho[i], 0.0) / sigma[i])
        directed[i, g.indices[i]] = w
    fused = directed + directed.T - directed * directed.T
    np.fill_diagonal(fused, 0.0)
    ii, jj = np.nonzero(np.triu(fused, k=1))
    return FuzzyGraph(
        n=n,
        edges_i=ii.astype(np.int64),
        edges_j=jj.astype(np.int64),
        weights=fused[ii, jj],
        rho=rho,
        sigma=sigma,
    )


def _curve_family(d: np.ndarray, a: float, b: float) -> np.ndarray:
    return 1.0 / (1.0 + a * np.power(d, 2.0 * b))


def fit_curve(
    min_dist: float = DEFAULT_MIN_DIST, spread: float = DEFAULT_SPREAD
) -> tuple[float, float]:
    """Least-squares (a, b) for 1/(1 + a*d^(2b)) against the piecewise target.

    The target is 1 inside min_dist and exp(-(d - min_dist)/spread)
    beyond, sampled on a fixed 300-point grid over [0, 3*spread].
    Levenberg-style damped Gauss-Newton from (1, 1); the problem is
    small and smooth, so divergence indicates bad inputs.
    """
    if min_dist <= 0 or spread <= 0:
        raise ValueError("min_dist and spread must be positive")
    if min_dist > spread * 10:
        raise ValueError(f"min_dist {min_dist} too large for spread {spread}")
    d = np.linspace(0.0, 3.0 * spread, _CURVE_GRID_POINTS)
    y = np.where(d <= min_dist, 1.0, np.exp(-(d - min_dist) / spread))

    a, b = 1.0, 1.0
    lam = 1e-3
    cost = float(np.sum((_curve_family(d, a, b) - y) ** 2))
    with np.errstate(divide="ignore"):
        log_d = np.where(d > 0, np.log(d), 0.0)
    for _ in range(200):
        pw = np.power(d, 2.0 * b)
        denom = (1.0 + a * pw) ** 2
        ja = -pw / denom
        jb = -2.0 * a * pw * log_d / denom
        ja[d == 0] = 0.0
        jb[d == 0] = 0.0
        r = _curve_family(d, a, b) - y
        J = np.stack([ja, jb], axis=1)
        g = J.T @ r
        H = J.T @ J
        step = np.linalg.solve(H + lam * np.eye(2), -g)
        na, nb = a + step[0], b + step[1]
        if not (np.isfinite(na) and np.isfinite(nb)) or na <= 0 or nb <= 0:
            lam *= 10.0
            continue
        new_cost = float(np.sum((_curve_family(d, na, nb) - y) ** 2))
        if new_cost < cost:
            a, b, cost = float(na), float(nb), new_cost
            lam = max(lam / 10.0, 1e-12)
            if float(np.linalg.norm(step)) < 1e-12:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ConvergenceError("curve fit diverged")
    return a, b


try:  # compiled kernel; fallback below performs identical arithmetic
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba present in dev environments
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@_njit(cache=True)
def _epoch_updates(
    Y: np.ndarray,
    edges_i: np.ndarray,
    edges_j: np.ndarray,
    sample_p: np.ndarray,
    edge_draws: np.ndarray,
    neg_draws: np.ndarray,
    a: float,
    b: float,
    alpha: float,
) -> None:  # pragma: no cover - exercised through optimize_layout
    dim = Y.shape[1]
    n_edges = edges_i.shape[0]
    half = neg_draws.shape[1] // 2
    for e in range(n_edges):
        if edge_draws[e] >= sample_p[e]:
            continue
        # a sampled edge fires once per direction: the head is pulled
        # toward the tail (and vice versa), then repelled from its own
        # batch of uniformly drawn points
        for side in range(2):
            if side == 0:
                head = edges_i[e]
                tail = edges_j[e]
                neg_lo = 0
            else:
                head = edges_j[e]
                tail = edges_i[e]
                neg_lo = half
            d2 = 0.0
            for c in range(dim):
                diff = Y[head, c] - Y[tail, c]
                d2 += diff * diff
            if d2 > 0.0:
                coef = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2**b)
            else:
                coef = 0.0
            for c in range(dim):
                grad = coef * (Y[head, c] - Y[tail, c])
                if grad > _GRAD_CLIP:
                    grad = _GRAD_CLIP
                elif grad < -_GRAD_CLIP:
                    grad = -_GRAD_CLIP
                Y[head, c] += alpha * grad
                Y[tail, c] -= alpha * grad
            for s in range(neg_lo, neg_lo + half):
                t = neg_draws[e, s]
                if t == head:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = Y[head, c] - Y[t, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coef = 2.0 * b / ((0.001 + d2) * (1.0 + a * d2**b))
                    for c in range(dim):
                        grad = coef * (Y[head, c] - Y[t, c])
                        if grad > _GRAD_CLIP:
                            grad = _GRAD_CLIP
                        elif grad < -_GRAD_CLIP:
                            grad = -_GRAD_CLIP
                        Y[head, c] += alpha * grad
                else:
                    for c in range(dim):
                        Y[head, c] += alpha * _GRAD_CLIP


def optimize_layout(
    graph: FuzzyGraph,
    init: np.ndarray,
    epochs: int = DEFAULT_EPOCHS,
    a: float | None = None,
    b: float | None = None,
    neg_samples: int = DEFAULT_NEG_SAMPLES,
    seed: int = 0,
    initial_alpha: float = 1.0,
) -> np.ndarray:
    """Sequential SGD refinement of an initial layout.

    Per epoch, every edge is sampled with probability weight/max_weight;
    a sampled edge fires in both directions, each head pulled toward the
    tail and pushed away from its own ``neg_samples`` uniformly drawn
    points.  The update order is fixed (edge order, direction, then draw
    order), making the result deterministic for a given seed.
    """
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    if a is None or b is None:
        a, b = fit_curve()
    Y = np.array(init, dtype=np.float64, copy=True)
    if Y.ndim != 2 or Y.shape[0] != graph.n:
        raise LayoutError(f"init shape {Y.shape} does not match n={graph.n}")
    if epochs == 0 or graph.edges_i.size == 0:
        return Y
    max_w = float(graph.weights.max())
    if max_w <= 0.0:
        return Y
    sample_p = graph.weights / max_w
    rng = np.random.default_rng(seed)
    n_edges = graph.edges_i.shape[0]
    for epoch in range(epochs):
        alpha = initial_alpha * (1.0 - epoch / float(epochs))
        edge_draws = rng.random(n_edges)
        neg_draws = rng.integers(0, graph.n, size=(n_edges, 2 * max(neg_samples, 1)))
        if neg_samples == 0:
            neg_draws = neg_draws[:, :0]
        _epoch_updates(
            Y,
            graph.edges_i,
            graph.edges_j,
            sample_p,
            edge_draws,
            neg_draws,
            float(a),
            float(b),
            alpha,
        )
        if not np.all(np.isfinite(Y)):
            raise LayoutError(f"non-finite layout update at epoch {epoch}")
    return Y


def spectral_init(graph: FuzzyGraph, k_out: int, seed: int) -> np.ndarray:
    """Eigenvectors of the symmetric normalized Laplacian, scaled to +-10.

    Component signs are fixed by making each eigenvector's largest-
    magnitude entry positive; a small seeded jitter breaks exact
    coincidences without costing determinism.
    """
    n = graph.n
    W = np.zeros((n, n), dtype=np.float64)
    W[graph.edges_i, graph.edges_j] = graph.weights
    W[graph.edges_j, graph.edges_i] = graph.weights
    deg = W.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lap = np.eye(n) - (inv_sqrt[:, None] * W) * inv_sqrt[None, :]
    _, vecs = eigh(lap)
    take = vecs[:, 1 : k_out + 1]
    if take.shape[1] < k_out:
        pad = np.zeros((n, k_out - take.shape[1]))
        take = np.hstack([take, pad])
    for c in range(take.shape[1]):
        col = take[:, c]
        pivot = int(np.argmax(np.abs(col)))
        if col[pivot] < 0:
            take[:, c] = -col
    peak = float(np.abs(take).max())
    if peak > 0:
        take = take * (10.0 / peak)
    rng = np.random.default_rng(seed)
    return take + rng.normal(0.0, 1e-4, size=take.shape)


def umap(
    X: EmbeddingMatrix | np.ndarray,
    k: int = DEFAULT_K,
    k_out: int = DEFAULT_K_OUT,
    min_dist: float = DEFAULT_MIN_DIST,
    spread: float = DEFAULT_SPREAD,
    epochs: int = DEFAULT_EPOCHS,
    neg_samples: int = DEFAULT_NEG_SAMPLES,
    metric: str = "cosine_distance",
    seed: int = 0,
) -> UmapResult:
    """Full pipeline: k-NN, fuzzy graph, init, SGD layout."""
    arr = _as_array(X)
    g = knn_graph(arr, k=k, metric=metric)
    fg = fuzzy_graph(g)
    if fg.is_connected():
        init = spectral_init(fg, k_out=k_out, seed=seed)
        init_mode = "spectral"
    else:
        rng = np.random.default_rng(seed)
        init = rng.normal(0.0, 10.0, size=(arr.shape[0], k_out))
        init_mode = "random"
    a, b = fit_curve(min_dist=min_dist, spread=spread)
    layout = optimize_layout(
        fg, init, epochs=epochs, a=a, b=b, neg_samples=neg_samples, seed=seed
    )
    params = {
        "k": k,
        "k_out": k_out,
        "min_dist": min_dist,
        "spread": spread,
        "epochs": epochs,
        "neg_samples": neg_samples,
        "metric": metric,
        "seed": seed,
        "a": a,
        "b": b,
        "init": init_mode,
    }
    return UmapResult(layout=layout, init_mode=init_mode, params=params)


def trustworthiness(
    X: EmbeddingMatrix | np.ndarray,
    Y: np.ndarray,
    k: int,
    metric: str = "euclidean",
) -> float:
    """Rank-based fidelity of a layout's neighborhoods to the input's.

    1 - 2/(n k (2n - 3k - 1)) * sum_i sum_{j in U_i} (r(i, j) - k), with
    U_i the k-NN of i in Y that are not k-NN of i in X and r the 1-based
    neighbor rank in X.
    """
    arr = _as_array(X)
    Y = np.asarray(Y, dtype=np.float64)
    n = arr.shape[0]
    if Y.shape[0] != n:
        raise ValueError("X and Y row counts differ")
    if not 1 <= k < n / 2:
        raise ValueError(f"need 1 <= k < n/2, got k={k}, n={n}")
    dist_x = pairwise_distances(arr, metric)
    np.fill_diagonal(dist_x, np.inf)
    order_x = np.argsort(dist_x, axis=1, kind="stable")
    ranks = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order_x] = np.arange(n)[None, :] + 1  # nearest gets rank 1
    dist_y = pairwise_distances(Y, "euclidean")
    np.fill_diagonal(dist_y, np.inf)
    order_y = np.argsort(dist_y, axis=1, kind="stable")[:, :k]
    total = 0
    for i in range(n):
        x_nn = set(order_x[i, :k].tolist())
        for j in order_y[i]:
            if int(j) not in x_nn:
                total += int(ranks[i, j]) - k
    score = 1.0 - (2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0))) * total
    return float(score)


def write_layout_csv(ids: Sequence[str], layout: np.ndarray, path: str | Path) -> None:
    """Emit `id,c1..c_kout` rows with full float precision."""
    k_out = layout.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"c{c + 1}" for c in range(k_out)])
        for i, doc_id in enumerate(ids):
            writer.writerow([doc_id] + [repr(float(v)) for v in layout[i]])


def read_layout_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a layout CSV back into (ids, coordinate array)."""
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise LayoutError(f"{path}: not a layout CSV")
        width = len(header) - 1
        for row in reader:
            if not row:
                continue
            if len(row) != width + 1:
                raise LayoutError(f"{path}: ragged row for id {row[0]!r}")
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.asarray(rows, dtype=np.float64)
