"""Shared synthetic corpora builders.

Three families: topic recovery corpora (vocabulary-disjoint topics),
cue-word segmentation corpora (argument starts are marked by one of five cue
tokens; inside/outside sentences are distributionally identical, so context
is required to close an argument), and aspect corpora (topics whose
arguments split into vocabulary-disjoint aspects).
"""

from __future__ import annotations

import numpy as np
import pytest

from argmine.corpus import BioTag, Corpus, Document, Sentence

CUE_TOKENS = ("first", "second", "moreover", "however", "finally")


def make_topic_corpus(
    n_topics: int = 12,
    docs_per_topic: int = 10,
    tokens_per_doc: int = 30,
    words_per_topic: int = 8,
    seed: int = 0,
) -> Corpus:
    """Documents over per-topic disjoint vocabularies; most tokens are a
    fixed cycle through the topic vocabulary, the rest random draws."""
    rng = np.random.default_rng(seed)
    base_repeats = max(1, (2 * tokens_per_doc) // (3 * words_per_topic))
    docs = []
    for t in range(n_topics):
        topic = f"topic{t:02d}"
        words = [f"{topic}word{j:02d}" for j in range(words_per_topic)]
        for d in range(docs_per_topic):
            tokens = words * base_repeats
            extra = tokens_per_doc - len(tokens)
            tokens = tokens + list(rng.choice(words, size=extra))
            rng.shuffle(tokens)
            text = " ".join(tokens)
            docs.append(
                Document(
                    doc_id=f"{topic}-doc{d:03d}",
                    title=f"{topic} document {d}",
                    topic=topic,
                    sentences=(Sentence(text=text.capitalize() + "."),),
                )
            )
    return Corpus(documents=tuple(docs), name="synthetic-topics")


def make_cue_corpus(
    n_topics: int = 10,
    docs_per_topic: int = 20,
    seed: int = 11,
) -> Corpus:
    """BIO-tagged documents whose arguments are cue-initial runs of length 3.

    O and I sentences draw from the same filler vocabulary, so a
    per-sentence model cannot separate them; the argument length is fixed,
    so a sequence model can.
    """
    rng = np.random.default_rng(seed)
    vocab = [f"word{j:02d}" for j in range(40)]

    def filler(k: int) -> str:
        return " ".join(rng.choice(vocab, size=k))

    docs = []
    for t in range(n_topics):
        topic = f"cuetopic{t:02d}"
        for d in range(docs_per_topic):
            sentences: list[Sentence] = []
            for _ in range(int(rng.integers(2, 5))):
                for _ in range(int(rng.integers(1, 3))):
                    sentences.append(
                        Sentence(text=filler(5).capitalize() + ".", bio=BioTag.O)
                    )
                cue = CUE_TOKENS[int(rng.integers(len(CUE_TOKENS)))]
                sentences.append(
                    Sentence(text=(cue + " " + filler(4)).capitalize() + ".", bio=BioTag.B)
                )
                for _ in range(2):
                    sentences.append(
                        Sentence(text=filler(5).capitalize() + ".", bio=BioTag.I)
                    )
            docs.append(
                Document(
                    doc_id=f"{topic}-doc{d:03d}",
                    title=f"post {d} on {topic}",
                    topic=topic,
                    sentences=tuple(sentences),
                )
            )
    return Corpus(documents=tuple(docs), name="synthetic-cues")


def make_aspect_corpus(
    n_topics: int = 5,
    n_aspects: int = 3,
    args_per_aspect: int = 8,
    seed: int = 13,
) -> Corpus:
    """Aspect-labeled arguments with vocabulary-disjoint aspects per topic."""
    rng = np.random.default_rng(seed)
    docs = []
    for t in range(n_topics):
        topic = f"asptopic{t:02d}"
        sentences: list[Sentence] = []
        for a in range(n_aspects):
            words = [f"t{t}a{a}term{j:02d}" for j in range(8)]
            for _ in range(args_per_aspect):
                n_sentences = int(rng.integers(1, 3))
                for s in range(n_sentences):
                    tokens = list(words[:4]) * 2 + list(rng.choice(words, size=4))
                    rng.shuffle(tokens)
                    sentences.append(
                        Sentence(
                            text=" ".join(tokens).capitalize() + ".",
                            bio=BioTag.B if s == 0 else BioTag.I,
                            aspect=f"aspect{a}",
                        )
                    )
        docs.append(
            Document(
                doc_id=f"{topic}-page",
                title=f"debate page for {topic}",
                topic=topic,
                sentences=tuple(sentences),
            )
        )
    return Corpus(documents=tuple(docs), name="synthetic-aspects")


def tagged_doc(doc_id: str, topic: str, tags: str, aspect: str | None = None) -> Document:
    """Small helper: one sentence per tag character."""
    sentences = tuple(
        Sentence(text=f"sentence {i} of {doc_id}.", bio=BioTag[c], aspect=aspect)
        for i, c in enumerate(tags)
    )
    return Document(doc_id=doc_id, title=doc_id, topic=topic, sentences=sentences)


@pytest.fixture(scope="session")
def topic_corpus() -> Corpus:
    return make_topic_corpus()


@pytest.fixture(scope="session")
def cue_corpus() -> Corpus:
    return make_cue_corpus()


@pytest.fixture(scope="session")
def aspect_corpus() -> Corpus:
    return make_aspect_corpus()
