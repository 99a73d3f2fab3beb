"""Clustering each topic's arguments by subtopic aspect.

Arguments (gold or predicted BIO spans) are clustered per topic and the
scores are averaged across topics. k for k-means comes from a linear
regression of aspect counts on argument counts; the density-based algorithm
keeps its min-cluster-size-2 setting. tf-idf can be computed within each
topic or across all topics (the scope only changes document frequencies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cluster import (
    ClusterAssignment,
    HdbscanConfig,
    KmeansConfig,
    hdbscan,
    kmeans,
)
from .corpus import Corpus, Document
from .dimred import UmapConfig, umap_fit_transform
from .errors import DataError
from .metrics import ClusteringEval, evaluate_clustering
from .seeding import derive_seed
from .seqlabel import segment_arguments
from .vectorize import EmbeddingSet, Vocabulary, build_vocab, tfidf_matrix, tokenize

EMBEDDING_CHOICES = ("tfidf", "bert_cls", "bert_avg")
ALGORITHM_CHOICES = ("kmeans", "hdbscan")
DIMRED_CHOICES = ("none", "umap")
SCOPE_CHOICES = ("within_topic", "across_topics")


@dataclass(frozen=True)
class KRegression:
    slope: float
    intercept: float


def fit_k_regression(points: Sequence[tuple[int, int]]) -> KRegression:
    """Ordinary least squares of aspect counts on argument counts."""
    if len(points) < 2:
        raise DataError("regression needs at least 2 (arguments, aspects) points")
    x = np.array([p[0] for p in points], dtype=np.float64)
    y = np.array([p[1] for p in points], dtype=np.float64)
    var = float(((x - x.mean()) ** 2).sum())
    if var == 0.0:
        raise DataError("regression x-values are all identical")
    slope = float(((x - x.mean()) * (y - y.mean())).sum() / var)
    return KRegression(slope=slope, intercept=float(y.mean() - slope * x.mean()))


def estimate_k(reg: KRegression, n_args: int) -> int:
    """Predicted cluster count, rounded half-up and clamped to [1, n_args]."""
    if n_args < 1:
        raise DataError(f"n_args must be >= 1, got {n_args}")
    predicted = int(math.floor(reg.slope * n_args + reg.intercept + 0.5))
    return max(1, min(n_args, predicted))


@dataclass(frozen=True)
class Argument:
    doc_id: str
    start: int  # sentence span within the document, stop exclusive
    stop: int
    text: str
    aspect: str | None
    sentence_ids: tuple[str, ...]


def extract_arguments(doc: Document) -> list[Argument]:
    """Arguments of one document from its (gold) BIO tags."""
    spans = segment_arguments(doc.tags(), doc.sentences)
    out = []
    for span in spans:
        aspects = [s.aspect for s in span.sentences if s.aspect is not None]
        out.append(
            Argument(
                doc_id=doc.doc_id,
                start=span.start,
                stop=span.stop,
                text=" ".join(s.text for s in span.sentences),
                aspect=aspects[0] if aspects else None,
                sentence_ids=tuple(
                    f"{doc.doc_id}#{i}" for i in range(span.start, span.stop)
                ),
            )
        )
    return out


def arguments_by_topic(corpus: Corpus) -> dict[str, list[Argument]]:
    grouped: dict[str, list[Argument]] = {}
    for doc in corpus.documents:
        grouped.setdefault(doc.topic, []).extend(extract_arguments(doc))
    return grouped


@dataclass(frozen=True)
class AspectConfig:
    embedding_kind: str
    algorithm: str
    dimred: str = "none"
    tfidf_scope: str = "within_topic"

    def __post_init__(self):
        if self.embedding_kind not in EMBEDDING_CHOICES:
            raise DataError(f"unknown embedding kind {self.embedding_kind!r}")
        if self.algorithm not in ALGORITHM_CHOICES:
            raise DataError(f"unknown algorithm {self.algorithm!r}")
        if self.dimred not in DIMRED_CHOICES:
            raise DataError(f"unknown dimred {self.dimred!r}")
        if self.tfidf_scope not in SCOPE_CHOICES:
            raise DataError(f"unknown tfidf scope {self.tfidf_scope!r}")

    def label(self) -> str:
        return f"{self.embedding_kind}/{self.algorithm}/{self.dimred}/{self.tfidf_scope}"


@dataclass(frozen=True)
class AspectRun:
    topic: str
    config: AspectConfig
    assignment: ClusterAssignment
    eval_with_noise: ClusteringEval
    eval_without_noise: ClusteringEval

    @property
    def eval(self) -> ClusteringEval:
        return self.eval_with_noise


def _argument_vectors(
    arguments: Sequence[Argument],
    config: AspectConfig,
    shared_vocab: Vocabulary | None,
    sentence_embeddings: EmbeddingSet | None,
) -> np.ndarray:
    if config.embedding_kind == "tfidf":
        token_docs = [tokenize(a.text) for a in arguments]
        if config.tfidf_scope == "across_topics":
            if shared_vocab is None:
                raise DataError("across-topic tf-idf needs the shared vocabulary")
            vocab = shared_vocab
        else:
            vocab = build_vocab(token_docs, max_features=None, max_df=1.0)
        return tfidf_matrix(token_docs, vocab)
    if sentence_embeddings is None:
        raise DataError(
            f"embedding kind {config.embedding_kind!r} needs sentence embeddings"
        )
    # Mean of the span's sentence vectors: length-invariant pooling.
    rows = [
        sentence_embeddings.to_matrix(a.sentence_ids).mean(axis=0) for a in arguments
    ]
    return np.stack(rows)


def cluster_topic_arguments(
    topic: str,
    arguments: Sequence[Argument],
    config: AspectConfig,
    reg: KRegression,
    shared_vocab: Vocabulary | None = None,
    sentence_embeddings: EmbeddingSet | None = None,
    seed: int = 0,
    umap_epochs: int = 200,
) -> AspectRun:
    """Cluster one topic's arguments and score them against aspect labels."""
    if len(arguments) < 2:
        raise DataError(f"topic {topic!r} has fewer than 2 arguments")
    missing = [a.doc_id for a in arguments if a.aspect is None]
    if missing:
        raise DataError(
            f"topic {topic!r}: argument(s) without aspect labels in {missing[:3]}"
        )
    X = _argument_vectors(arguments, config, shared_vocab, sentence_embeddings)
    run_seed = derive_seed(seed, f"argclust/{topic}/{config.label()}")
    if config.dimred == "umap" and X.shape[0] >= 4:
        umap_cfg = UmapConfig(
            n_neighbors=min(15, X.shape[0] - 1),
            n_components=min(5, max(2, X.shape[0] - 2)),
            n_epochs=umap_epochs,
            seed=run_seed,
        )
        X = umap_fit_transform(X, umap_cfg)
    if config.algorithm == "kmeans":
        k = estimate_k(reg, len(arguments))
        assignment = kmeans(X, KmeansConfig(k=k, seed=run_seed)).assignment
    else:
        assignment = hdbscan(X, HdbscanConfig(min_cluster_size=2)).assignment
    truth = [a.aspect for a in arguments]
    return AspectRun(
        topic=topic,
        config=config,
        assignment=assignment,
        eval_with_noise=evaluate_clustering(
            truth, assignment.labels, mode="with_noise_single_cluster"
        ),
        eval_without_noise=evaluate_clustering(
            truth, assignment.labels, mode="exclude_noise"
        ),
    )


# The reporting grid: eleven pooled-noise rows plus the noise-excluded
# variant of the plain tf-idf density row.
DEFAULT_GRID: tuple[tuple[AspectConfig, str], ...] = (
    (AspectConfig("tfidf", "hdbscan", "umap", "within_topic"), "with_noise"),
    (AspectConfig("tfidf", "hdbscan", "umap", "across_topics"), "with_noise"),
    (AspectConfig("tfidf", "hdbscan", "none", "within_topic"), "with_noise"),
    (AspectConfig("tfidf", "kmeans", "none", "within_topic"), "with_noise"),
    (AspectConfig("tfidf", "kmeans", "none", "across_topics"), "with_noise"),
    (AspectConfig("bert_cls", "hdbscan", "umap", "within_topic"), "with_noise"),
    (AspectConfig("bert_cls", "hdbscan", "none", "within_topic"), "with_noise"),
    (AspectConfig("bert_cls", "kmeans", "none", "within_topic"), "with_noise"),
    (AspectConfig("bert_avg", "hdbscan", "umap", "within_topic"), "with_noise"),
    (AspectConfig("bert_avg", "hdbscan", "none", "within_topic"), "with_noise"),
    (AspectConfig("bert_avg", "kmeans", "none", "within_topic"), "with_noise"),
    (AspectConfig("tfidf", "hdbscan", "none", "within_topic"), "without_noise"),
)


@dataclass(frozen=True)
class AggregateRow:
    embedding: str
    algorithm: str
    dimred: str
    scope: str
    noise_mode: str
    ari: float
    homogeneity: float
    completeness: float
    bcubed_f1: float
    n_topics: int


def aggregate_runs(
    runs: Mapping[AspectConfig, Sequence[AspectRun]],
    grid: Sequence[tuple[AspectConfig, str]] = DEFAULT_GRID,
) -> list[AggregateRow]:
    """Unweighted mean over topics for every grid row."""
    if not any(runs.values()):
        raise DataError("no aspect runs to aggregate")
    rows = []
    for config, noise_mode in grid:
        config_runs = runs.get(config, ())
        if not config_runs:
            continue
        evals = [
            r.eval_without_noise if noise_mode == "without_noise" else r.eval_with_noise
            for r in config_runs
        ]
        rows.append(
            AggregateRow(
                embedding=config.embedding_kind,
                algorithm=config.algorithm,
                dimred=config.dimred,
                scope=config.tfidf_scope,
                noise_mode=noise_mode,
                ari=float(np.mean([e.ari for e in evals])),
                homogeneity=float(np.mean([e.homogeneity for e in evals])),
                completeness=float(np.mean([e.completeness for e in evals])),
                bcubed_f1=float(np.mean([e.bcubed_f1 for e in evals])),
                n_topics=len(evals),
            )
        )
    return rows


def aggregate_to_csv(rows: Sequence[AggregateRow]) -> str:
    lines = ["embedding,algorithm,dimred,scope,noise_mode,ari,ho,co,bcubed_f1,n_topics"]
    for r in rows:
        lines.append(
            f"{r.embedding},{r.algorithm},{r.dimred},{r.scope},{r.noise_mode},"
            f"{r.ari!r},{r.homogeneity!r},{r.completeness!r},{r.bcubed_f1!r},{r.n_topics}"
        )
    return "\n".join(lines) + "\n"


def run_grid(
    topics_arguments: Mapping[str, Sequence[Argument]],
    reg: KRegression,
    sentence_embeddings: Mapping[str, EmbeddingSet] | None = None,
    grid: Sequence[tuple[AspectConfig, str]] = DEFAULT_GRID,
    seed: int = 0,
    umap_epochs: int = 200,
) -> tuple[dict[AspectConfig, list[AspectRun]], dict[str, int]]:
    """Execute every distinct grid configuration over every eligible topic.

    Topics with fewer than 2 arguments are skipped and counted. Returns the
    per-config runs plus a skip report. ``sentence_embeddings`` maps the
    transformer embedding kinds to their EmbeddingSets.
    """
    sentence_embeddings = sentence_embeddings or {}
    configs: list[AspectConfig] = []
    for config, _ in grid:
        if config not in configs:
            configs.append(config)
    eligible = {
        t: args for t, args in sorted(topics_arguments.items()) if len(args) >= 2
    }
    skipped = {t: len(a) for t, a in sorted(topics_arguments.items()) if len(a) < 2}
    needs_shared = any(
        c.embedding_kind == "tfidf" and c.tfidf_scope == "across_topics"
        for c in configs
    )
    shared_vocab = None
    if needs_shared and eligible:
        all_tokens = [
            tokenize(a.text) for args in eligible.values() for a in args
        ]
        shared_vocab = build_vocab(all_tokens, max_features=None, max_df=1.0)
    runs: dict[AspectConfig, list[AspectRun]] = {c: [] for c in configs}
    for config in configs:
        embeddings = sentence_embeddings.get(config.embedding_kind)
        for topic, args in eligible.items():
            runs[config].append(
                cluster_topic_arguments(
                    topic,
                    args,
                    config,
                    reg,
                    shared_vocab=shared_vocab,
                    sentence_embeddings=embeddings,
                    seed=seed,
                    umap_epochs=umap_epochs,
                )
            )
    return runs, skipped
