"""Annotated corpora: documents, sentence-level BIO/aspect labels, topic splits.

A corpus is a list of documents, each belonging to exactly one topic and
holding an ordered list of sentences. Sentences optionally carry a BIO tag
(argument boundaries) and an aspect label (subtopic of the argument they
belong to). Corpora arrive pre-sentencized; see the ``sentencize`` CLI helper
for raw text.

File format (one document per JSONL line, UTF-8, LF):

    {"doc_id": str, "title": str, "topic": str,
     "sentences": [{"text": str, "bio": "B"|"I"|"O"?, "aspect": str?}]}

A sidecar ``<name>.split.json`` stores a topic split as
``{"seed": int, "train": [str], "val": [str], "test": [str]}``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError


class BioTag(enum.IntEnum):
    """Sentence-level argument boundary tag, ordered B < I < O."""

    B = 0
    I = 1
    O = 2

    @classmethod
    def from_str(cls, value: str) -> "BioTag":
        try:
            return cls[value]
        except KeyError:
            raise DataError(f"unknown BIO tag {value!r}, expected one of B, I, O")


@dataclass(frozen=True)
class Sentence:
    text: str
    bio: BioTag | None = None
    aspect: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise DataError("sentence text is empty after trimming whitespace")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    topic: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        if not self.sentences:
            raise DataError(f"document {self.doc_id!r} has no sentences")
        tagged = sum(1 for s in self.sentences if s.bio is not None)
        if tagged not in (0, len(self.sentences)):
            raise DataError(
                f"document {self.doc_id!r} mixes tagged and untagged sentences"
            )

    @property
    def is_tagged(self) -> bool:
        return self.sentences[0].bio is not None

    def tags(self) -> list[BioTag]:
        if not self.is_tagged:
            raise DataError(f"document {self.doc_id!r} carries no BIO tags")
        return [s.bio for s in self.sentences]

    def sentence_ids(self) -> list[str]:
        """Stable per-sentence ids, also used as embedding row keys."""
        return [f"{self.doc_id}#{i}" for i in range(len(self.sentences))]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    name: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise DataError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def topics(self) -> list[str]:
        """Sorted list of distinct topic labels."""
        return sorted({d.topic for d in self.documents})

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]

    def sentence_ids(self) -> list[str]:
        return [sid for d in self.documents for sid in d.sentence_ids()]

    def sentence_texts(self) -> list[str]:
        return [s.text for d in self.documents for s in d.sentences]


@dataclass(frozen=True)
class SplitSpec:
    train_topics: frozenset[str]
    val_topics: frozenset[str]
    test_topics: frozenset[str]
    seed: int = 0

    def __post_init__(self):
        overlap = (
            (self.train_topics & self.val_topics)
            | (self.train_topics & self.test_topics)
            | (self.val_topics & self.test_topics)
        )
        if overlap:
            raise DataError(f"split sides overlap on topics {sorted(overlap)}")


def _sentence_from_json(obj: dict, doc_id: str, index: int) -> Sentence:
    if not isinstance(obj, dict) or "text" not in obj:
        raise DataError(f"document {doc_id!r}: sentence {index} lacks a text field")
    bio = obj.get("bio")
    return Sentence(
        text=obj["text"],
        bio=BioTag.from_str(bio) if bio is not None else None,
        aspect=obj.get("aspect"),
    )


def _document_from_json(obj: dict) -> Document:
    for key in ("doc_id", "title", "topic", "sentences"):
        if key not in obj:
            raise DataError(f"document record lacks required field {key!r}")
    doc_id = obj["doc_id"]
    sentences = tuple(
        _sentence_from_json(s, doc_id, i) for i, s in enumerate(obj["sentences"])
    )
    return Document(doc_id=doc_id, title=obj["title"], topic=obj["topic"], sentences=sentences)


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load and validate a corpus file. Errors name the offending line or doc."""
    if format != "jsonl":
        raise DataError(f"unsupported corpus format {format!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"corpus file not found: {path}")
    documents: list[Document] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            try:
                documents.append(_document_from_json(obj))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}")
    return Corpus(documents=tuple(documents), name=path.stem)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.documents:
            record = {
                "doc_id": doc.doc_id,
                "title": doc.title,
                "topic": doc.topic,
                "sentences": [_sentence_to_json(s) for s in doc.sentences],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _sentence_to_json(s: Sentence) -> dict:
    obj: dict = {"text": s.text}
    if s.bio is not None:
        obj["bio"] = s.bio.name
    if s.aspect is not None:
        obj["aspect"] = s.aspect
    return obj


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_by_topic(
    corpus: Corpus, test_frac: float, val_frac: float = 0.15, seed: int = 0
) -> SplitSpec:
    """Partition the corpus topics into train/val/test sets.

    Topics are shuffled by a seeded permutation and partitioned; side sizes
    are round-half-up of frac * n_topics, with at least one topic on every
    requested non-empty side. Deterministic for a fixed seed.
    """
    if not 0.0 < test_frac < 1.0:
        raise DataError(f"test_frac must be in (0, 1), got {test_frac}")
    if not 0.0 <= val_frac < 1.0:
        raise DataError(f"val_frac must be in [0, 1), got {val_frac}")
    if test_frac + val_frac >= 1.0:
        raise DataError("test_frac + val_frac must be < 1")
    topics = corpus.topics()
    n = len(topics)
    if n < 2 or (val_frac > 0 and n < 3):
        raise DataError(
            f"corpus has {n} topic(s), too few to honor the requested fractions"
        )
    n_test = max(1, _round_half_up(test_frac * n))
    n_val = max(1, _round_half_up(val_frac * n)) if val_frac > 0 else 0
    if n_test + n_val >= n:
        raise DataError(
            f"split of {n} topics leaves no training topics "
            f"(test={n_test}, val={n_val})"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    shuffled = [topics[i] for i in order]
    return SplitSpec(
        test_topics=frozenset(shuffled[:n_test]),
        val_topics=frozenset(shuffled[n_test : n_test + n_val]),
        train_topics=frozenset(shuffled[n_test + n_val :]),
        seed=seed,
    )


def select(corpus: Corpus, topics: Iterable[str]) -> Corpus:
    """Sub-corpus of the documents whose topic is in ``topics``, order kept."""
    wanted = set(topics)
    unknown = wanted - set(corpus.topics())
    if unknown:
        raise DataError(f"unknown topic label(s): {sorted(unknown)}")
    return Corpus(
        documents=tuple(d for d in corpus.documents if d.topic in wanted),
        name=corpus.name,
    )


def save_split(split: SplitSpec, path: str | Path) -> None:
    payload = {
        "seed": split.seed,
        "train": sorted(split.train_topics),
        "val": sorted(split.val_topics),
        "test": sorted(split.test_topics),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_split(path: str | Path) -> SplitSpec:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"split file not found: {path}")
    obj = json.loads(path.read_text(encoding="utf-8"))
    for key in ("train", "val", "test"):
        if key not in obj:
            raise DataError(f"{path}: split file lacks field {key!r}")
    return SplitSpec(
        train_topics=frozenset(obj["train"]),
        val_topics=frozenset(obj["val"]),
        test_topics=frozenset(obj["test"]),
        seed=int(obj.get("seed", 0)),
    )
