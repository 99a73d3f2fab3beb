"""Clustering and tagging evaluation measures, plus inter-annotator agreement.

Clustering metrics accept a predicted labeling that may contain a reserved
noise id (-1). Two noise conventions are supported: pooling all noise items
into one predicted cluster (default) and excluding noise items from the
evaluation. A third convention, each noise item as its own singleton cluster,
exists for sensitivity analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import BioTag
from .errors import DataError

NOISE_ID = -1

NOISE_MODES = ("with_noise_single_cluster", "exclude_noise", "with_noise_singletons")


def _as_labels(values: Sequence) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DataError("labels must be one-dimensional")
    return arr


def _check_lengths(truth: np.ndarray, pred: np.ndarray) -> None:
    if len(truth) != len(pred):
        raise DataError(
            f"label length mismatch: {len(truth)} true vs {len(pred)} predicted"
        )


def _contingency(truth: np.ndarray, pred: np.ndarray) -> np.ndarray:
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def adjusted_rand_index(truth: Sequence, pred: Sequence) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    truth, pred = _as_labels(truth), _as_labels(pred)
    _check_lengths(truth, pred)
    n = len(truth)
    if n < 2:
        raise DataError("adjusted Rand index needs at least 2 items")

    def comb2(x: np.ndarray) -> int:
        return int((x.astype(object) * (x - 1) // 2).sum())

    table = _contingency(truth, pred)
    index = comb2(table.ravel())
    sum_rows = comb2(table.sum(axis=1))
    sum_cols = comb2(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = sum_rows * sum_cols / total
    maximum = (sum_rows + sum_cols) / 2.0
    if maximum == expected:
        # Both partitions degenerate in the same way; identical by pairs.
        return 1.0
    return float((index - expected) / (maximum - expected))


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    probs = counts[counts > 0] / total
    return float(-(probs * np.log(probs)).sum())


def homogeneity_completeness(truth: Sequence, pred: Sequence) -> tuple[float, float]:
    """Entropy-ratio measures Ho = 1 - H(C|K)/H(C), Co = 1 - H(K|C)/H(K).

    Either measure is 1.0 when its denominator entropy is zero.
    """
    truth, pred = _as_labels(truth), _as_labels(pred)
    _check_lengths(truth, pred)
    table = _contingency(truth, pred).astype(np.float64)
    n = table.sum()
    h_c = _entropy(table.sum(axis=1))
    h_k = _entropy(table.sum(axis=0))
    # H(C|K) = sum_k p(k) H(C | K=k), natural log.
    h_c_given_k = 0.0
    for k in range(table.shape[1]):
        col = table[:, k]
        tot = col.sum()
        if tot > 0:
            h_c_given_k += (tot / n) * _entropy(col)
    h_k_given_c = 0.0
    for c in range(table.shape[0]):
        row = table[c, :]
        tot = row.sum()
        if tot > 0:
            h_k_given_c += (tot / n) * _entropy(row)
    homogeneity = 1.0 if h_c == 0.0 else 1.0 - h_c_given_k / h_c
    completeness = 1.0 if h_k == 0.0 else 1.0 - h_k_given_c / h_k
    return float(homogeneity), float(completeness)


def _apply_noise_mode(
    truth: np.ndarray, pred: np.ndarray, mode: str, noise_id: int
) -> tuple[np.ndarray, np.ndarray]:
    if mode not in NOISE_MODES:
        raise DataError(f"unknown noise mode {mode!r}, expected one of {NOISE_MODES}")
    noise = pred == noise_id
    if mode == "exclude_noise":
        if noise.all():
            raise DataError("all items are noise; nothing left to evaluate")
        return truth[~noise], pred[~noise]
    if mode == "with_noise_singletons":
        pred = pred.copy()
        fresh = pred.max(initial=0) + 1
        for i in np.flatnonzero(noise):
            pred[i] = fresh
            fresh += 1
        return truth, pred
    # with_noise_single_cluster: the noise id already forms one pooled cluster.
    return truth, pred


def bcubed(
    truth: Sequence,
    pred: Sequence,
    mode: str = "with_noise_single_cluster",
    noise_id: int = NOISE_ID,
) -> tuple[float, float, float]:
    """Item-averaged cluster precision/recall and their harmonic mean.

    Per item e: precision = |C(e) & L(e)| / |C(e)|, recall = |C(e) & L(e)| / |L(e)|,
    where C(e) is e's predicted cluster and L(e) its true class.
    """
    truth, pred = _as_labels(truth), _as_labels(pred)
    _check_lengths(truth, pred)
    truth, pred = _apply_noise_mode(truth, pred, mode, noise_id)
    table = _contingency(truth, pred).astype(np.float64)
    class_sizes = table.sum(axis=1)
    cluster_sizes = table.sum(axis=0)
    n = table.sum()
    # Every item in cell (c, k) shares the same per-item precision and recall.
    precision = float((table * (table / cluster_sizes[None, :])).sum() / n)
    recall = float((table * (table / class_sizes[:, None])).sum() / n)
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class ClusteringEval:
    ari: float
    homogeneity: float
    completeness: float
    bcubed_precision: float
    bcubed_recall: float
    bcubed_f1: float
    n_clusters: int
    noise_fraction: float

    def to_json(self) -> dict:
        return {
            "ari": self.ari,
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
            "bcubed_precision": self.bcubed_precision,
            "bcubed_recall": self.bcubed_recall,
            "bcubed_f1": self.bcubed_f1,
            "n_clusters": self.n_clusters,
            "noise_fraction": self.noise_fraction,
        }


def evaluate_clustering(
    truth: Sequence,
    pred: Sequence,
    mode: str = "with_noise_single_cluster",
    noise_id: int = NOISE_ID,
) -> ClusteringEval:
    """Bundle of ARI, homogeneity, completeness, and BCubed under one
    noise convention. Cluster and noise counts refer to the raw prediction."""
    truth_arr, pred_arr = _as_labels(truth), _as_labels(pred)
    _check_lengths(truth_arr, pred_arr)
    noise = pred_arr == noise_id
    n_clusters = len(set(pred_arr[~noise].tolist()))
    t, p = _apply_noise_mode(truth_arr, pred_arr, mode, noise_id)
    ho, co = homogeneity_completeness(t, p)
    bp, br, bf = bcubed(truth_arr, pred_arr, mode=mode, noise_id=noise_id)
    return ClusteringEval(
        ari=adjusted_rand_index(t, p),
        homogeneity=ho,
        completeness=co,
        bcubed_precision=bp,
        bcubed_recall=br,
        bcubed_f1=bf,
        n_clusters=n_clusters,
        noise_fraction=float(noise.mean()) if len(pred_arr) else 0.0,
    )


@dataclass(frozen=True)
class TaggingEval:
    precision: dict[str, float]  # per tag name B/I/O
    recall: dict[str, float]
    f1: dict[str, float]
    f1_macro: float
    f1_weighted: float
    f1_macro_bi: float
    confusion: np.ndarray  # 3x3, rows = truth, cols = prediction

    def to_json(self) -> dict:
        out: dict = {}
        for tag in ("B", "I", "O"):
            out[f"precision_{tag}"] = self.precision[tag]
            out[f"recall_{tag}"] = self.recall[tag]
            out[f"f1_{tag}"] = self.f1[tag]
        out["f1_macro"] = self.f1_macro
        out["f1_weighted"] = self.f1_weighted
        out["f1_macro_BI"] = self.f1_macro_bi
        out["confusion"] = [[int(v) for v in row] for row in self.confusion]
        return out


def tagging_eval(
    truth: Sequence[Sequence[BioTag]], pred: Sequence[Sequence[BioTag]]
) -> TaggingEval:
    """Sentence-pool micro-averaged BIO tagging metrics.

    Sequences must align pairwise; sentences are pooled across documents
    before counting. Zero denominators yield 0 for the affected measure.
    """
    if len(truth) != len(pred):
        raise DataError(
            f"sequence count mismatch: {len(truth)} true vs {len(pred)} predicted"
        )
    confusion = np.zeros((3, 3), dtype=np.int64)
    for idx, (t_seq, p_seq) in enumerate(zip(truth, pred)):
        if len(t_seq) != len(p_seq):
            raise DataError(f"sequence {idx} length mismatch")
        for t, p in zip(t_seq, p_seq):
            confusion[int(t), int(p)] += 1
    return tagging_eval_from_confusion(confusion)


def tagging_eval_from_confusion(confusion: np.ndarray) -> TaggingEval:
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.shape != (3, 3):
        raise DataError("confusion matrix must be 3x3")
    precision: dict[str, float] = {}
    recall: dict[str, float] = {}
    f1: dict[str, float] = {}
    support = confusion.sum(axis=1)
    for tag in BioTag:
        i = int(tag)
        tp = confusion[i, i]
        pred_total = confusion[:, i].sum()
        true_total = support[i]
        p = float(tp / pred_total) if pred_total > 0 else 0.0
        r = float(tp / true_total) if true_total > 0 else 0.0
        precision[tag.name] = p
        recall[tag.name] = r
        f1[tag.name] = 2 * p * r / (p + r) if p + r > 0 else 0.0
    per_class = np.array([f1[t.name] for t in BioTag])
    total = support.sum()
    weighted = float((per_class * support).sum() / total) if total > 0 else 0.0
    return TaggingEval(
        precision=precision,
        recall=recall,
        f1=f1,
        f1_macro=float(per_class.mean()),
        f1_weighted=weighted,
        f1_macro_bi=float((f1["B"] + f1["I"]) / 2.0),
        confusion=confusion,
    )


def krippendorff_alpha_nominal(ratings: Sequence[Sequence]) -> float:
    """Inter-annotator agreement over a units x annotators partial matrix.

    ``ratings[u][a]`` is annotator a's label for unit u, or None/NaN when
    missing. Uses the nominal distance and the coincidence-matrix form:
    alpha = 1 - D_o / D_e over units with at least two ratings.
    """
    units: list[list] = []
    for row in ratings:
        values = [
            v
            for v in row
            if v is not None and not (isinstance(v, float) and math.isnan(v))
        ]
        if len(values) >= 2:
            units.append(values)
    if len(units) < 2:
        raise DataError("need at least 2 units with at least 2 ratings each")
    categories = sorted({v for values in units for v in values}, key=str)
    cat_index = {c: i for i, c in enumerate(categories)}
    k = len(categories)
    coincidence = np.zeros((k, k), dtype=np.float64)
    for values in units:
        m = len(values)
        for a in range(m):
            for b in range(m):
                if a != b:
                    coincidence[cat_index[values[a]], cat_index[values[b]]] += 1.0 / (
                        m - 1
                    )
    n_by_cat = coincidence.sum(axis=1)
    n_total = n_by_cat.sum()
    observed = coincidence.sum() - np.trace(coincidence)
    expected = (n_total**2 - (n_by_cat**2).sum()) / (n_total - 1.0)
    if expected == 0.0:
        # A single category everywhere: no disagreement is possible.
        return 1.0
    return float(1.0 - observed / expected)
