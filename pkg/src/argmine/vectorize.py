"""Text vectorization: tf-idf with vocabulary controls, embedding file I/O,
and a deterministic hashing embedder used when no transformer files exist.

Embedding TSV format: first line ``#dim=<D>\\t#kind=<kind>``, then one row per
id: ``id<TAB>f1 f2 ... fD`` with floats in shortest round-trip decimal form.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

EMBEDDING_KINDS = ("tfidf", "bert_cls", "bert_avg", "hash_test")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens: maximal runs of letters/digits, length >= 2."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


@dataclass(frozen=True)
class Vocabulary:
    """Lexicographically sorted term set with document frequencies."""

    terms: tuple[str, ...]
    doc_freq: np.ndarray  # per-term document counts, aligned with terms
    n_docs: int
    term_to_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.term_to_index:
            object.__setattr__(
                self, "term_to_index", {t: i for i, t in enumerate(self.terms)}
            )

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self) -> np.ndarray:
        """Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1."""
        return np.log((1.0 + self.n_docs) / (1.0 + self.doc_freq)) + 1.0


def build_vocab(
    docs: Sequence[Sequence[str]],
    max_features: int | None = None,
    max_df: float = 1.0,
) -> Vocabulary:
    """Build a vocabulary from tokenized documents.

    Terms with doc_freq/n_docs > max_df are dropped; if more than
    max_features remain, the highest-total-count terms are kept (ties broken
    lexicographically). The result is independent of document order.
    """
    if not docs:
        raise DataError("cannot build a vocabulary from zero documents")
    if not 0.0 < max_df <= 1.0:
        raise DataError(f"max_df must be in (0, 1], got {max_df}")
    df: dict[str, int] = {}
    counts: dict[str, int] = {}
    for tokens in docs:
        seen: set[str] = set()
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
            seen.add(tok)
        for tok in seen:
            df[tok] = df.get(tok, 0) + 1
    n_docs = len(docs)
    kept = [t for t, d in df.items() if d / n_docs <= max_df]
    if max_features is not None and len(kept) > max_features:
        kept.sort(key=lambda t: (-counts[t], t))
        kept = kept[:max_features]
    kept.sort()
    if not kept:
        raise DataError("vocabulary is empty after filtering")
    return Vocabulary(
        terms=tuple(kept),
        doc_freq=np.array([df[t] for t in kept], dtype=np.int64),
        n_docs=n_docs,
    )


def tfidf_matrix(docs: Sequence[Sequence[str]], vocab: Vocabulary) -> np.ndarray:
    """Dense n_docs x |vocab| tf-idf matrix, rows L2-normalized.

    tf is the raw in-document count; idf the smoothed variant from the
    vocabulary. All-zero rows (no vocabulary terms) stay all-zero.
    """
    idf = vocab.idf()
    X = np.zeros((len(docs), len(vocab)), dtype=np.float64)
    index = vocab.term_to_index
    for row, tokens in enumerate(docs):
        for tok in tokens:
            j = index.get(tok)
            if j is not None:
                X[row, j] += 1.0
    X *= idf
    norms = np.linalg.norm(X, axis=1)
    nonzero = norms > 0.0
    X[nonzero] /= norms[nonzero, None]
    return X


@dataclass
class EmbeddingSet:
    """Id-indexed dense vectors of one declared dimension."""

    dim: int
    vectors: dict[str, np.ndarray]
    kind: str = "tfidf"

    def __post_init__(self):
        if self.dim <= 0:
            raise DataError(f"embedding dim must be positive, got {self.dim}")
        for key, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(
                    f"vector {key!r} has length {vec.shape[0]}, expected {self.dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise DataError(f"vector {key!r} contains non-finite components")

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __getitem__(self, key: str) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise DataError(f"no embedding for id {key!r}")

    def to_matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Stack vectors for ``ids`` into a len(ids) x dim matrix."""
        missing = [i for i in ids if i not in self.vectors]
        if missing:
            raise DataError(f"missing embedding id(s): {missing[:5]}")
        if not ids:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self.vectors[i] for i in ids])


def tfidf(
    docs: Sequence[Sequence[str]],
    vocab: Vocabulary,
    ids: Sequence[str] | None = None,
) -> EmbeddingSet:
    """tf-idf vectors as an EmbeddingSet keyed by ``ids`` (default 0..n-1)."""
    X = tfidf_matrix(docs, vocab)
    if ids is None:
        ids = [str(i) for i in range(len(docs))]
    if len(ids) != len(docs):
        raise DataError(f"{len(ids)} ids for {len(docs)} documents")
    return EmbeddingSet(
        dim=len(vocab),
        vectors={i: X[row] for row, i in enumerate(ids)},
        kind="tfidf",
    )


def _shortest_repr(x: float) -> str:
    return repr(float(x))


def save_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#dim={embeddings.dim}\t#kind={embeddings.kind}\n")
        for key in embeddings.vectors:
            values = " ".join(_shortest_repr(v) for v in embeddings.vectors[key])
            fh.write(f"{key}\t{values}\n")


def load_embeddings(
    path: str | Path, expected_ids: Iterable[str] | None = None
) -> EmbeddingSet:
    """Parse an embedding TSV; errors name the offending row."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embedding file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        m = re.fullmatch(r"#dim=(\d+)\t#kind=(\S+)", header)
        if not m:
            raise DataError(f"{path}: malformed header line {header!r}")
        dim = int(m.group(1))
        kind = m.group(2)
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                key, raw = line.split("\t", 1)
            except ValueError:
                raise DataError(f"{path}:{lineno}: row lacks a tab separator")
            parts = raw.split(" ")
            if len(parts) != dim:
                raise DataError(
                    f"{path}: row {key!r} has {len(parts)} values, expected {dim}"
                )
            try:
                vec = np.array([float(p) for p in parts], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}: row {key!r} has a non-numeric value")
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}: row {key!r} has a non-finite value")
            if key in vectors:
                raise DataError(f"{path}: duplicate embedding id {key!r}")
            vectors[key] = vec
    if expected_ids is not None:
        missing = [i for i in expected_ids if i not in vectors]
        if missing:
            raise DataError(f"{path}: missing embedding id(s): {missing[:5]}")
    return EmbeddingSet(dim=dim, vectors=vectors, kind=kind)


def _token_hash(token: str, seed: int) -> int:
    key = (seed & (1 << 64) - 1).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def hash_embed(
    sentences: Sequence[str],
    dim: int,
    seed: int = 0,
    ids: Sequence[str] | None = None,
    kind: str = "hash_test",
) -> EmbeddingSet:
    """Deterministic bag-of-words embeddings via signed feature hashing.

    Each token maps to one bucket with sign +/-1 from a seeded 64-bit hash;
    the sentence vector is the mean of its token vectors, L2-normalized.
    """
    if dim < 8:
        raise DataError(f"hash embedding dim must be >= 8, got {dim}")
    if ids is None:
        ids = [str(i) for i in range(len(sentences))]
    if len(ids) != len(sentences):
        raise DataError(f"{len(ids)} ids for {len(sentences)} sentences")
    vectors: dict[str, np.ndarray] = {}
    for key, text in zip(ids, sentences):
        vec = np.zeros(dim, dtype=np.float64)
        tokens = tokenize(text)
        for tok in tokens:
            h = _token_hash(tok, seed)
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[h % dim] += sign
        if tokens:
            vec /= len(tokens)
            norm = np.linalg.norm(vec)
            if norm > 0.0:
                vec /= norm
        vectors[key] = vec
    return EmbeddingSet(dim=dim, vectors=vectors, kind=kind)
