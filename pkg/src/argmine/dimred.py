"""Dimensionality reduction used ahead of clustering: truncated-SVD latent
semantic vectors and a neighbor-graph manifold layout (UMAP-style).

Both fits are single-threaded and deterministic; the manifold layout is
deterministic for a fixed config seed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from .cluster import pairwise_distances
from .errors import DataError, NumericError

_LSA_MAGIC = b"LSA1"


@dataclass(frozen=True)
class LsaModel:
    components: np.ndarray  # k x V, rows orthonormal
    singular_values: np.ndarray  # length k, non-increasing
    k: int

    def __post_init__(self):
        if self.components.shape[0] != self.k or len(self.singular_values) != self.k:
            raise DataError("component count does not match k")
        if np.any(np.diff(self.singular_values) > 1e-12):
            raise NumericError("singular values are not sorted non-increasing")


def _canonicalize_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        j = int(np.abs(row).argmax())
        if row[j] < 0:
            row *= -1.0
    return out


def lsa_fit(X: np.ndarray, k: int, max_iter: int = 300, tol: float = 1e-8) -> LsaModel:
    """Best rank-k factorization of X by singular value.

    Small problems (both sides < 200) use a dense SVD; larger ones use block
    power iteration with re-orthonormalization, run until the top-k singular
    value estimates change by less than ``tol`` relatively. Component signs
    are canonicalized so each row's largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    n, V = X.shape
    if not 1 <= k <= min(n, V):
        raise DataError(f"rank k={k} out of range for a {n}x{V} matrix")
    if max(n, V) < 200:
        _, svals, Vt = np.linalg.svd(X, full_matrices=False)
        components = Vt[:k]
        svals = svals[:k]
    else:
        oversample = min(8, min(n, V) - k)
        rng = np.random.default_rng(0)  # fixed internal seed: fit is deterministic
        Q, _ = np.linalg.qr(rng.standard_normal((V, k + oversample)))
        prev = None
        for _ in range(max_iter):
            Z, _ = np.linalg.qr(X @ Q)
            Q, R = np.linalg.qr(X.T @ Z)
            estimates = np.sort(np.abs(np.diag(R)))[::-1][:k]
            if prev is not None:
                scale = max(float(estimates[0]), 1e-300)
                if float(np.abs(estimates - prev).max()) <= tol * scale:
                    break
            prev = estimates
        _, svals, Wt = np.linalg.svd(X @ Q, full_matrices=False)
        components = (Wt @ Q.T)[:k]
        svals = svals[:k]
    return LsaModel(
        components=_canonicalize_signs(components),
        singular_values=np.asarray(svals, dtype=np.float64),
        k=k,
    )


def lsa_transform(model: LsaModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.components.shape[1]:
        raise DataError(
            f"matrix has {X.shape[1]} columns, model expects {model.components.shape[1]}"
        )
    return X @ model.components.T


def save_lsa(model: LsaModel, path: str | Path) -> None:
    k, V = model.components.shape
    with Path(path).open("wb") as fh:
        fh.write(_LSA_MAGIC)
        fh.write(struct.pack("<II", k, V))
        fh.write(model.singular_values.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(model.components, dtype="<f8").tobytes())


def load_lsa(path: str | Path) -> LsaModel:
    raw = Path(path).read_bytes()
    if raw[:4] != _LSA_MAGIC:
        raise DataError(f"{path}: not a serialized LSA model")
    k, V = struct.unpack("<II", raw[4:12])
    svals = np.frombuffer(raw[12 : 12 + 8 * k], dtype="<f8")
    components = np.frombuffer(raw[12 + 8 * k :], dtype="<f8").reshape(k, V)
    return LsaModel(components=components.copy(), singular_values=svals.copy(), k=k)


# ---------------------------------------------------------------------------
# Manifold layout


@dataclass(frozen=True)
class UmapConfig:
    n_neighbors: int = 15
    n_components: int = 5
    min_dist: float = 0.1
    n_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise DataError(f"n_neighbors must be >= 2, got {self.n_neighbors}")
        if self.n_components < 2:
            raise DataError(f"n_components must be >= 2, got {self.n_components}")
        if self.min_dist < 0:
            raise DataError(f"min_dist must be >= 0, got {self.min_dist}")


def smooth_knn_calibration(
    knn_dists: np.ndarray, n_neighbors: int, n_iter: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (sigma, rho) so that the fuzzy neighborhood has cardinality
    log2(n_neighbors).

    rho_i is the distance to the nearest neighbor; sigma_i is found by
    bisection on sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k).
    """
    n = knn_dists.shape[0]
    target = math.log2(n_neighbors)
    rho = knn_dists[:, 0].copy()
    sigma = np.ones(n, dtype=np.float64)
    for i in range(n):
        lo, hi, mid = 0.0, math.inf, 1.0
        shifted = np.maximum(knn_dists[i] - rho[i], 0.0)
        for _ in range(n_iter):
            psum = float(np.exp(-shifted / mid).sum())
            if abs(psum - target) < 1e-12:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == math.inf else (lo + hi) / 2.0
        sigma[i] = mid
    return sigma, rho


def fuzzy_graph(X: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Symmetric fuzzy neighborhood graph (probabilistic union a+b-ab) over
    the exact Euclidean k-NN of each point. Dense n x n, entries in [0, 1]."""
    n = X.shape[0]
    D = pairwise_distances(X)
    order = np.argsort(D, axis=1, kind="stable")
    knn_idx = order[:, 1 : n_neighbors + 1]
    knn_dists = np.take_along_axis(D, knn_idx, axis=1)
    sigma, rho = smooth_knn_calibration(knn_dists, n_neighbors)
    W = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        if sigma[i] > 0.0:
            w = np.exp(-np.maximum(knn_dists[i] - rho[i], 0.0) / sigma[i])
        else:
            w = (knn_dists[i] <= rho[i]).astype(np.float64)
        W[i, knn_idx[i]] = w
    return W + W.T - W * W.T


def fit_output_curve(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares (a, b) for the low-dimensional similarity curve
    1/(1 + a d^(2b)) matched to the offset exponential with the given
    min_dist and spread."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xs = np.linspace(0.0, spread * 3.0, 300)
    ys = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist) / spread))
    params, _ = curve_fit(curve, xs, ys)
    return float(params[0]), float(params[1])


def _make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    result = -1.0 * np.ones(len(weights))
    n_samples = n_epochs * (weights / weights.max())
    positive = n_samples > 0
    result[positive] = float(n_epochs) / n_samples[positive]
    return result


def _clip(value: float) -> float:
    if value > 4.0:
        return 4.0
    if value < -4.0:
        return -4.0
    return value


def _optimize_layout(
    embedding: list[list[float]],
    head: list[int],
    tail: list[int],
    epochs_per_sample: np.ndarray,
    a: float,
    b: float,
    n_epochs: int,
    rng: np.random.Generator,
    negative_sample_rate: int = 5,
    initial_alpha: float = 1.0,
    repulsion: float = 1.0,
) -> None:
    n_vertices = len(embedding)
    dim = len(embedding[0])
    n_edges = len(head)
    epochs_per_negative = epochs_per_sample / negative_sample_rate
    next_sample = epochs_per_sample.copy()
    next_negative = epochs_per_negative.copy()
    # Buffered random draws keep the sequential loop cheap.
    buffer = rng.integers(0, n_vertices, size=8192).tolist()
    buf_pos = 0

    def rand_vertex() -> int:
        nonlocal buffer, buf_pos
        if buf_pos >= len(buffer):
            buffer = rng.integers(0, n_vertices, size=8192).tolist()
            buf_pos = 0
        value = buffer[buf_pos]
        buf_pos += 1
        return value

    alpha = initial_alpha
    for epoch in range(n_epochs):
        for e in range(n_edges):
            if next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            current = embedding[i]
            other = embedding[j]
            d2 = 0.0
            for d in range(dim):
                diff = current[d] - other[d]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2**b + 1.0)
                for d in range(dim):
                    grad = _clip(coeff * (current[d] - other[d])) * alpha
                    current[d] += grad
                    other[d] -= grad
            next_sample[e] += epochs_per_sample[e]
            n_neg = int((epoch - next_negative[e]) / epochs_per_negative[e])
            if n_neg <= 0:
                continue
            for _ in range(n_neg):
                k = rand_vertex()
                if k == i:
                    continue
                other = embedding[k]
                d2 = 0.0
                for d in range(dim):
                    diff = current[d] - other[d]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = (2.0 * repulsion * b) / ((0.001 + d2) * (a * d2**b + 1.0))
                    for d in range(dim):
                        current[d] += _clip(coeff * (current[d] - other[d])) * alpha
                else:
                    for d in range(dim):
                        current[d] += 4.0 * alpha
            next_negative[e] += n_neg * epochs_per_negative[e]
        alpha = initial_alpha * (1.0 - (epoch + 1) / n_epochs)


def umap_fit_transform(X: np.ndarray, cfg: UmapConfig) -> np.ndarray:
    """Embed X into cfg.n_components dimensions.

    Exact k-NN graph -> per-point bandwidth calibration -> fuzzy union ->
    sampled SGD on the fuzzy cross-entropy with 5 negative samples per
    positive. Duplicate input rows receive identical output rows.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if cfg.n_neighbors >= n:
        raise DataError(f"n_neighbors={cfg.n_neighbors} must be < n={n}")
    if not np.all(np.isfinite(X)):
        raise NumericError("input matrix contains non-finite values")
    unique, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    n_unique = unique.shape[0]
    if n_unique == 1:
        return np.zeros((n, cfg.n_components), dtype=np.float64)
    n_neighbors = min(cfg.n_neighbors, n_unique - 1)

    W = fuzzy_graph(unique, n_neighbors)
    a, b = fit_output_curve(cfg.min_dist)

    # Drop edges too weak to ever be sampled, as the epoch budget defines.
    threshold = W.max() / float(cfg.n_epochs)
    head: list[int] = []
    tail: list[int] = []
    weights: list[float] = []
    for i in range(n_unique):
        for j in range(n_unique):
            if i != j and W[i, j] >= threshold and W[i, j] > 0.0:
                head.append(i)
                tail.append(j)
                weights.append(W[i, j])
    rng = np.random.default_rng(cfg.seed)
    embedding = rng.uniform(-10.0, 10.0, size=(n_unique, cfg.n_components))
    if head:
        rows = [list(map(float, row)) for row in embedding]
        _optimize_layout(
            rows,
            head,
            tail,
            _make_epochs_per_sample(np.array(weights), cfg.n_epochs),
            a,
            b,
            cfg.n_epochs,
            rng,
        )
        embedding = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(embedding)):
        raise NumericError("layout diverged to non-finite coordinates")
    return embedding[inverse]
