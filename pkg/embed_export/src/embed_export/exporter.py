"""Batch sentence-embedding export from a pretrained transformer.

Reads the pipeline's corpus JSONL, runs deterministic inference (eval mode,
no gradients), and writes the pipeline's embedding TSV with one row per
sentence id ``<doc_id>#<sentence_index>``. Two poolings:

- ``bert_cls``: the first-token final hidden state.
- ``bert_avg``: the mean of the final hidden states over real word
  positions (padding and special tokens excluded).

Rows are written in corpus order regardless of batching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import AutoModel, AutoTokenizer

KINDS = ("bert_cls", "bert_avg")
DEFAULT_MODEL = "distilbert-base-uncased"


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExportJob:
    corpus_path: Path
    out_path: Path
    kind: str
    model_name: str = DEFAULT_MODEL
    max_length: int = 128
    batch_size: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExportError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.max_length < 2:
            raise ExportError(f"max_length must be >= 2, got {self.max_length}")


@dataclass(frozen=True)
class ExportStats:
    n_sentences: int
    n_truncated: int
    dim: int


def read_corpus_sentences(path: Path) -> list[tuple[str, str]]:
    """(sentence_id, text) pairs from corpus JSONL, in corpus order."""
    if not path.is_file():
        raise ExportError(f"corpus file not found: {path}")
    pairs: list[tuple[str, str]] = []
    seen_docs: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            try:
                doc_id = record["doc_id"]
                sentences = record["sentences"]
            except KeyError as exc:
                raise ExportError(f"{path}:{lineno}: missing field {exc}")
            if doc_id in seen_docs:
                raise ExportError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            seen_docs.add(doc_id)
            for index, sentence in enumerate(sentences):
                pairs.append((f"{doc_id}#{index}", sentence["text"]))
    if not pairs:
        raise ExportError(f"{path}: corpus holds no sentences")
    return pairs


def _pool(
    hidden: torch.Tensor,
    attention_mask: torch.Tensor,
    special_mask: torch.Tensor,
    kind: str,
) -> torch.Tensor:
    if kind == "bert_cls":
        return hidden[:, 0, :]
    word_mask = (attention_mask.bool() & ~special_mask.bool()).unsqueeze(-1)
    counts = word_mask.sum(dim=1).clamp(min=1)
    summed = (hidden * word_mask).sum(dim=1)
    means = summed / counts
    # Sentences with no word tokens fall back to the mean over all real
    # (non-padding) positions, specials included.
    empty = word_mask.sum(dim=1).squeeze(-1) == 0
    if bool(empty.any()):
        am = attention_mask.bool().unsqueeze(-1)
        fallback = (hidden * am).sum(dim=1) / am.sum(dim=1).clamp(min=1)
        means = torch.where(empty, fallback, means)
    return means


def export(job: ExportJob) -> ExportStats:
    pairs = read_corpus_sentences(job.corpus_path)
    tokenizer = AutoTokenizer.from_pretrained(job.model_name)
    model = AutoModel.from_pretrained(job.model_name)
    model.eval()
    dim = int(model.config.hidden_size)

    n_truncated = 0
    job.out_path.parent.mkdir(parents=True, exist_ok=True)
    with job.out_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#dim={dim}\t#kind={job.kind}\n")
        for start in range(0, len(pairs), job.batch_size):
            batch = pairs[start : start + job.batch_size]
            texts = [text for _, text in batch]
            full_lengths = [
                len(tokenizer(t, add_special_tokens=True)["input_ids"]) for t in texts
            ]
            n_truncated += sum(1 for l in full_lengths if l > job.max_length)
            encoded = tokenizer(
                texts,
                padding=True,
                truncation=True,
                max_length=job.max_length,
                return_special_tokens_mask=True,
                return_tensors="pt",
            )
            special_mask = encoded.pop("special_tokens_mask")
            with torch.no_grad():
                output = model(**encoded)
            vectors = _pool(
                output.last_hidden_state,
                encoded["attention_mask"],
                special_mask,
                job.kind,
            )
            for (sentence_id, _), vector in zip(batch, vectors):
                values = " ".join(repr(float(v)) for v in vector.tolist())
                fh.write(f"{sentence_id}\t{values}\n")
    return ExportStats(n_sentences=len(pairs), n_truncated=n_truncated, dim=dim)
