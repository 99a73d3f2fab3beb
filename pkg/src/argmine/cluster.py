"""Clustering algorithms: seeded k-means, density-based hierarchical
clustering with noise (mutual-reachability MST, condensed hierarchy,
excess-of-mass selection), and single-term argmax labeling.

All assignments use dense non-noise ids 0..n_clusters-1 in first-occurrence
order, with -1 reserved for noise. Everything is deterministic per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError

NOISE_ID = -1


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # int labels, -1 = noise
    noise_id: int = NOISE_ID

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        used = sorted(set(labels.tolist()) - {self.noise_id})
        if used != list(range(len(used))):
            raise DataError(f"cluster ids are not dense: {used[:10]}")

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels.tolist()) - {self.noise_id})

    @property
    def noise_fraction(self) -> float:
        if len(self.labels) == 0:
            return 0.0
        return float((self.labels == self.noise_id).mean())

    def to_json(self, ids: Sequence[str]) -> dict:
        if len(ids) != len(self.labels):
            raise DataError(f"{len(ids)} ids for {len(self.labels)} labels")
        return {
            "labels": {i: int(l) for i, l in zip(ids, self.labels)},
            "noise_id": self.noise_id,
        }


def dense_relabel(raw: np.ndarray, noise_id: int = NOISE_ID) -> np.ndarray:
    """Remap labels to dense ids 0..k-1 in first-occurrence order."""
    mapping: dict[int, int] = {}
    out = np.empty(len(raw), dtype=np.int64)
    for i, value in enumerate(raw.tolist()):
        if value == noise_id:
            out[i] = noise_id
            continue
        if value not in mapping:
            mapping[value] = len(mapping)
        out[i] = mapping[value]
    return out


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix."""
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    D = np.sqrt(d2)
    np.fill_diagonal(D, 0.0)
    return D


# ---------------------------------------------------------------------------
# k-means


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    max_iter: int = 300
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise DataError(f"k must be >= 1, got {self.k}")
        if self.tol < 0:
            raise DataError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class KmeansResult:
    assignment: ClusterAssignment
    centroids: np.ndarray
    inertia: float
    inertia_trace: tuple[float, ...]
    n_iter: int


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: each step draws 2 + floor(ln k) candidates
    proportional to squared distance and keeps the one that lowers the
    potential the most."""
    n = X.shape[0]
    n_trials = 2 + int(math.log(k)) if k > 1 else 1
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # All remaining mass at chosen centers; fall back to uniform draw.
            centroids[c] = X[int(rng.integers(n))]
            continue
        cumulative = np.cumsum(d2)
        best_idx, best_d2, best_potential = -1, d2, math.inf
        for r in rng.random(n_trials) * total:
            idx = min(int(np.searchsorted(cumulative, r, side="right")), n - 1)
            cand_d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
            potential = float(cand_d2.sum())
            if potential < best_potential:
                best_idx, best_d2, best_potential = idx, cand_d2, potential
        centroids[c] = X[best_idx]
        d2 = best_d2
    return centroids


def kmeans(X: np.ndarray, cfg: KmeansConfig) -> KmeansResult:
    """Lloyd iterations from a k-means++ seeding.

    Ties in assignment go to the lowest centroid index. Clusters that come
    up empty are re-seeded to the point farthest from its current centroid.
    Stops when the largest centroid shift drops below tol.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if cfg.k > n:
        raise DataError(f"k={cfg.k} exceeds the number of points ({n})")
    rng = np.random.default_rng(cfg.seed)
    centroids = _kmeans_pp_init(X, cfg.k, rng)
    labels = np.zeros(n, dtype=np.int64)
    trace: list[float] = []
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), labels]
        trace.append(float(point_d2.sum()))
        new_centroids = centroids.copy()
        taken: set[int] = set()
        for c in range(cfg.k):
            members = labels == c
            if members.any():
                new_centroids[c] = X[members].mean(axis=0)
        for c in range(cfg.k):
            if not (labels == c).any():
                order = np.argsort(-point_d2, kind="stable")
                pick = next(int(i) for i in order if int(i) not in taken)
                taken.add(pick)
                new_centroids[c] = X[pick]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < cfg.tol:
            break
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    trace.append(inertia)
    dense = dense_relabel(labels)
    used_first: dict[int, int] = {}
    for raw, new in zip(labels.tolist(), dense.tolist()):
        used_first.setdefault(new, raw)
    ordered = np.stack([centroids[used_first[i]] for i in range(len(used_first))])
    return KmeansResult(
        assignment=ClusterAssignment(labels=dense),
        centroids=ordered,
        inertia=inertia,
        inertia_trace=tuple(trace),
        n_iter=n_iter,
    )


# ---------------------------------------------------------------------------
# Density-based hierarchical clustering


@dataclass(frozen=True)
class HdbscanConfig:
    min_cluster_size: int = 2
    min_samples: int | None = None  # defaults to min_cluster_size

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise DataError(
                f"min_cluster_size must be >= 2, got {self.min_cluster_size}"
            )
        if self.min_samples is not None and self.min_samples < 1:
            raise DataError(f"min_samples must be >= 1, got {self.min_samples}")

    @property
    def effective_min_samples(self) -> int:
        return self.min_samples if self.min_samples is not None else self.min_cluster_size


@dataclass(frozen=True)
class HdbscanResult:
    assignment: ClusterAssignment
    membership: np.ndarray  # per-point strength in [0, 1], 0 for noise
    mst_edges: tuple[tuple[int, int, float], ...]

    @property
    def mst_weight(self) -> float:
        return float(sum(w for _, _, w in self.mst_edges))


def core_distances(X: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to each point's min_samples-th nearest neighbor."""
    n = X.shape[0]
    if min_samples >= n:
        raise DataError(f"min_samples={min_samples} needs more than {n} points")
    D = pairwise_distances(X)
    return np.sort(D, axis=1)[:, min_samples]


def mutual_reachability(X: np.ndarray, min_samples: int) -> np.ndarray:
    """d_m(a, b) = max(core(a), core(b), d(a, b)); zero on the diagonal."""
    D = pairwise_distances(X)
    core = np.sort(D, axis=1)[:, min_samples]
    M = np.maximum(np.maximum(core[:, None], core[None, :]), D)
    np.fill_diagonal(M, 0.0)
    return M


def minimum_spanning_tree(W: np.ndarray) -> list[tuple[int, int, float]]:
    """Prim's algorithm on a dense weight matrix; ties go to the lowest index."""
    n = W.shape[0]
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    best = W[0].copy()
    best_from = np.zeros(n, dtype=np.int64)
    best[0] = np.inf
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        j = int(np.argmin(np.where(visited, np.inf, best)))
        edges.append((int(best_from[j]), j, float(best[j])))
        visited[j] = True
        better = ~visited & (W[j] < best)
        best[better] = W[j][better]
        best_from[better] = j
    return edges


def _single_linkage(edges: list[tuple[int, int, float]], n: int) -> np.ndarray:
    """Union-find agglomeration of sorted MST edges into dendrogram rows
    (left_id, right_id, distance, size); merge ids run from n upward."""
    order = sorted(range(len(edges)), key=lambda i: edges[i][2])
    parent = list(range(2 * n - 1))
    size = [1] * n + [0] * (n - 1)
    rows = np.zeros((n - 1, 4), dtype=np.float64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    next_id = n
    for row, i in enumerate(order):
        a, b, w = edges[i]
        ra, rb = find(a), find(b)
        rows[row] = (ra, rb, w, size[ra] + size[rb])
        parent[ra] = parent[rb] = next_id
        size[next_id] = size[ra] + size[rb]
        next_id += 1
    return rows


def _condense_tree(
    linkage: np.ndarray, n: int, min_cluster_size: int
) -> list[tuple[int, int, float, int]]:
    """Collapse the dendrogram into (parent, child, lambda, size) rows.

    Splits where both sides reach min_cluster_size create new cluster ids;
    smaller sides fall out of the parent cluster point by point at the
    split's lambda = 1/distance. Cluster ids start at n (the root).
    """

    def node_size(node: int) -> int:
        return 1 if node < n else int(linkage[node - n, 3])

    def leaves(node: int) -> list[int]:
        stack, out = [node], []
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                left, right = int(linkage[cur - n, 0]), int(linkage[cur - n, 1])
                stack.extend((left, right))
        return out

    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    rows: list[tuple[int, int, float, int]] = []
    ignore: set[int] = set()
    # Dendrogram merge nodes in top-down order.
    for node in range(root, n - 1, -1):
        if node in ignore:
            continue
        left, right, dist = (
            int(linkage[node - n, 0]),
            int(linkage[node - n, 1]),
            float(linkage[node - n, 2]),
        )
        lam = 1.0 / dist if dist > 0.0 else math.inf
        cluster = relabel[node]
        left_n, right_n = node_size(left), node_size(right)
        if left_n >= min_cluster_size and right_n >= min_cluster_size:
            for child in (left, right):
                relabel[child] = next_label
                rows.append((cluster, next_label, lam, node_size(child)))
                next_label += 1
        else:
            for child, count in ((left, left_n), (right, right_n)):
                if count >= min_cluster_size:
                    relabel[child] = cluster
                else:
                    for leaf in leaves(child):
                        rows.append((cluster, leaf, lam, 1))
                    ignore.update(_subtree_merges(linkage, child, n))
    return rows


def _subtree_merges(linkage: np.ndarray, node: int, n: int) -> set[int]:
    out: set[int] = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur >= n:
            out.add(cur)
            stack.append(int(linkage[cur - n, 0]))
            stack.append(int(linkage[cur - n, 1]))
    return out


def _stability(rows: list[tuple[int, int, float, int]], root: int) -> dict[int, float]:
    births: dict[int, float] = {root: 0.0}
    for parent, child, lam, _ in rows:
        if child >= root:  # cluster child
            births[child] = lam
    stability: dict[int, float] = {c: 0.0 for c in births}
    for parent, child, lam, size in rows:
        stability[parent] += (lam - births[parent]) * size
    return stability


def _excess_of_mass(
    rows: list[tuple[int, int, float, int]], root: int
) -> set[int]:
    """Select the most stable antichain of clusters, never the root; if the
    hierarchy never split, fall back to the root (one cluster, no noise)."""
    children: dict[int, list[int]] = {}
    for parent, child, _, _ in rows:
        if child >= root:
            children.setdefault(parent, []).append(child)
    stability = _stability(rows, root)
    clusters = sorted((c for c in stability if c != root), reverse=True)
    if not clusters:
        return {root}
    is_cluster = {c: True for c in clusters}
    adjusted = dict(stability)
    for node in clusters:  # largest id first = leaves before parents
        subtree = sum(adjusted[c] for c in children.get(node, []))
        if subtree > adjusted[node]:
            adjusted[node] = subtree
            is_cluster[node] = False
        else:
            # This node wins; deselect everything below it.
            stack = list(children.get(node, []))
            while stack:
                cur = stack.pop()
                is_cluster[cur] = False
                stack.extend(children.get(cur, []))
    return {c for c, keep in is_cluster.items() if keep}


def hdbscan(X: np.ndarray, cfg: HdbscanConfig) -> HdbscanResult:
    """Density-based clustering with a reserved noise label.

    Pipeline: core distances -> mutual reachability -> MST (Prim) ->
    single-linkage hierarchy -> condensed tree at min_cluster_size ->
    excess-of-mass cluster selection; unselected points become noise.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < cfg.min_cluster_size:
        raise DataError(
            f"{n} points are fewer than min_cluster_size={cfg.min_cluster_size}"
        )
    if not np.all(np.isfinite(X)):
        raise NumericError("input matrix contains non-finite values")
    if n <= cfg.effective_min_samples:
        # Not enough neighbors to estimate density; everything is one group.
        return HdbscanResult(
            assignment=ClusterAssignment(labels=np.zeros(n, dtype=np.int64)),
            membership=np.ones(n, dtype=np.float64),
            mst_edges=(),
        )
    W = mutual_reachability(X, cfg.effective_min_samples)
    edges = minimum_spanning_tree(W)
    linkage = _single_linkage(edges, n)
    root = n
    rows = _condense_tree(linkage, n, cfg.min_cluster_size)
    selected = _excess_of_mass(rows, root)

    cluster_parent: dict[int, int] = {}
    point_rows: dict[int, tuple[int, float]] = {}
    for parent, child, lam, _ in rows:
        if child >= root:
            cluster_parent[child] = parent
        else:
            point_rows[child] = (parent, lam)

    # Highest lambda seen among the points of each selected cluster's subtree.
    max_lambda: dict[int, float] = {c: 0.0 for c in selected}
    owner: dict[int, int | None] = {}

    def selected_ancestor(cluster: int) -> int | None:
        if cluster in owner:
            return owner[cluster]
        cur: int | None = cluster
        while cur is not None and cur not in selected:
            cur = cluster_parent.get(cur)
        owner[cluster] = cur
        return cur

    raw = np.full(n, NOISE_ID, dtype=np.int64)
    lam_point = np.zeros(n, dtype=np.float64)
    for point, (parent, lam) in point_rows.items():
        top = selected_ancestor(parent)
        if top is not None:
            raw[point] = top
            lam_point[point] = lam
            if lam > max_lambda[top] and math.isfinite(lam):
                max_lambda[top] = lam

    labels = dense_relabel(raw)
    membership = np.zeros(n, dtype=np.float64)
    for i in range(n):
        if labels[i] == NOISE_ID:
            continue
        top = raw[i]
        peak = max_lambda.get(top, 0.0)
        if peak <= 0.0 or not math.isfinite(lam_point[i]):
            membership[i] = 1.0
        else:
            membership[i] = min(lam_point[i], peak) / peak
    return HdbscanResult(
        assignment=ClusterAssignment(labels=labels),
        membership=membership,
        mst_edges=tuple(edges),
    )


# ---------------------------------------------------------------------------
# argmax labeling


def argmax_label(X: np.ndarray) -> ClusterAssignment:
    """Label each row by its largest column; ties go to the lowest column.

    All-zero rows get the noise id. Labels are remapped densely in
    first-occurrence order. Invariant under per-row positive rescaling.
    """
    X = np.asarray(X, dtype=np.float64)
    raw = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        row = X[i]
        if not row.any():
            raw[i] = NOISE_ID
        else:
            raw[i] = int(row.argmax())
    return ClusterAssignment(labels=dense_relabel(raw))
