"""CLI: ``embed-export export --corpus c.jsonl --kind {cls,avg} --out e.tsv``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .exporter import DEFAULT_MODEL, ExportError, ExportJob, export

_KIND_ALIASES = {"cls": "bert_cls", "avg": "bert_avg"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Write per-sentence transformer embeddings as pipeline TSV.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="run a batch export")
    p.add_argument("--corpus", required=True, help="corpus JSONL path")
    p.add_argument("--kind", required=True, choices=sorted(_KIND_ALIASES))
    p.add_argument("--out", required=True, help="output TSV path")
    p.add_argument("--model", default=DEFAULT_MODEL, help="model name or local path")
    p.add_argument("--max-len", type=int, default=128, help="token truncation length")
    p.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus_path=Path(args.corpus),
        out_path=Path(args.out),
        kind=_KIND_ALIASES[args.kind],
        model_name=args.model,
        max_length=args.max_len,
        batch_size=args.batch_size,
    )
    try:
        stats = export(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {stats.n_sentences} rows (dim {stats.dim}) to {args.out}; "
        f"{stats.n_truncated} sentence(s) truncated"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
