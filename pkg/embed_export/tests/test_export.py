import json

import pytest
import torch
from transformers import AutoModel, AutoTokenizer, DistilBertConfig, DistilBertModel, DistilBertTokenizerFast

from embed_export.cli import main
from embed_export.exporter import ExportError, ExportJob, export, read_corpus_sentences

from argmine.vectorize import load_embeddings

WORDS = [
    "alpha", "beta", "gamma", "delta", "epsilon",
    "zeta", "eta", "theta", "iota", "kappa",
]


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    """Small randomly initialized transformer saved locally."""
    directory = tmp_path_factory.mktemp("tiny-model")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    (directory / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = DistilBertTokenizerFast(
        vocab_file=str(directory / "vocab.txt"), do_lower_case=True
    )
    tokenizer.save_pretrained(directory)
    torch.manual_seed(7)
    config = DistilBertConfig(
        vocab_size=len(vocab),
        dim=32,
        n_layers=2,
        n_heads=2,
        hidden_dim=64,
        max_position_embeddings=64,
    )
    DistilBertModel(config).save_pretrained(directory)
    return directory


def _write_corpus(path, sentence_texts):
    record = {
        "doc_id": "doc1",
        "title": "fixture",
        "topic": "t",
        "sentences": [{"text": t} for t in sentence_texts],
    }
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")


@pytest.fixture()
def ten_sentence_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_corpus(path, [f"{WORDS[i]} {WORDS[(i + 1) % 10]}" for i in range(10)])
    return path


class TestExportContract:
    def test_ten_rows_parse_via_pipeline_loader(self, model_dir, ten_sentence_corpus, tmp_path):
        out = tmp_path / "cls.tsv"
        stats = export(
            ExportJob(
                corpus_path=ten_sentence_corpus,
                out_path=out,
                kind="bert_cls",
                model_name=str(model_dir),
            )
        )
        expected_ids = [f"doc1#{i}" for i in range(10)]
        embeddings = load_embeddings(out, expected_ids=expected_ids)
        assert embeddings.dim == 32  # the model's hidden size
        assert stats.dim == 32
        assert len(embeddings) == 10
        assert embeddings.kind == "bert_cls"

    def test_avg_kind_also_parses(self, model_dir, ten_sentence_corpus, tmp_path):
        out = tmp_path / "avg.tsv"
        export(
            ExportJob(
                corpus_path=ten_sentence_corpus,
                out_path=out,
                kind="bert_avg",
                model_name=str(model_dir),
            )
        )
        embeddings = load_embeddings(out)
        assert embeddings.kind == "bert_avg" and len(embeddings) == 10

    def test_identical_sentences_identical_rows(self, model_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        _write_corpus(corpus, ["alpha beta gamma", "alpha beta gamma"])
        out = tmp_path / "e.tsv"
        export(ExportJob(corpus, out, "bert_cls", str(model_dir)))
        lines = out.read_text().strip().split("\n")[1:]
        assert lines[0].split("\t")[1] == lines[1].split("\t")[1]

    def test_avg_single_token_equals_token_hidden_state(self, model_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        _write_corpus(corpus, ["alpha"])
        out = tmp_path / "e.tsv"
        export(ExportJob(corpus, out, "bert_avg", str(model_dir)))
        row = load_embeddings(out).vectors["doc1#0"]
        # independent forward pass: the word token sits between [CLS] and [SEP]
        tokenizer = AutoTokenizer.from_pretrained(model_dir)
        model = AutoModel.from_pretrained(model_dir)
        model.eval()
        encoded = tokenizer("alpha", return_tensors="pt")
        assert encoded["input_ids"].shape[1] == 3
        with torch.no_grad():
            hidden = model(**encoded).last_hidden_state[0]
        expected = hidden[1].tolist()
        assert row == pytest.approx(expected, abs=1e-5)

    def test_cls_is_first_token_state(self, model_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        _write_corpus(corpus, ["beta gamma delta"])
        out = tmp_path / "e.tsv"
        export(ExportJob(corpus, out, "bert_cls", str(model_dir)))
        row = load_embeddings(out).vectors["doc1#0"]
        tokenizer = AutoTokenizer.from_pretrained(model_dir)
        model = AutoModel.from_pretrained(model_dir)
        model.eval()
        with torch.no_grad():
            hidden = model(**tokenizer("beta gamma delta", return_tensors="pt"))
        assert row == pytest.approx(hidden.last_hidden_state[0, 0].tolist(), abs=1e-5)

    def test_row_count_equals_sentence_count(self, model_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        records = []
        for d in range(3):
            records.append(
                {
                    "doc_id": f"d{d}",
                    "title": "x",
                    "topic": "t",
                    "sentences": [{"text": "alpha beta"}, {"text": "gamma"}],
                }
            )
        corpus.write_text(
            "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8"
        )
        out = tmp_path / "e.tsv"
        stats = export(ExportJob(corpus, out, "bert_avg", str(model_dir)))
        assert stats.n_sentences == 6
        assert len(load_embeddings(out)) == 6

    def test_truncation_counted(self, model_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        _write_corpus(corpus, ["alpha " * 30, "beta"])
        out = tmp_path / "e.tsv"
        stats = export(
            ExportJob(corpus, out, "bert_avg", str(model_dir), max_length=8)
        )
        assert stats.n_truncated == 1
        assert len(load_embeddings(out)) == 2


class TestCorpusReader:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ExportError, match="not found"):
            read_corpus_sentences(tmp_path / "nope.jsonl")

    def test_duplicate_doc_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        line = json.dumps(
            {"doc_id": "a", "title": "", "topic": "", "sentences": [{"text": "x"}]}
        )
        path.write_text(line + "\n" + line + "\n", encoding="utf-8")
        with pytest.raises(ExportError, match="duplicate"):
            read_corpus_sentences(path)

    def test_sentence_ids_in_order(self, tmp_path):
        path = tmp_path / "c.jsonl"
        _write_corpus(path, ["alpha", "beta"])
        pairs = read_corpus_sentences(path)
        assert [p[0] for p in pairs] == ["doc1#0", "doc1#1"]


class TestCli:
    def test_export_subcommand(self, model_dir, ten_sentence_corpus, tmp_path):
        out = tmp_path / "cli.tsv"
        code = main(
            [
                "export",
                "--corpus", str(ten_sentence_corpus),
                "--kind", "cls",
                "--out", str(out),
                "--model", str(model_dir),
                "--max-len", "16",
            ]
        )
        assert code == 0
        assert load_embeddings(out).kind == "bert_cls"

    def test_bad_corpus_exit_code(self, model_dir, tmp_path):
        code = main(
            [
                "export",
                "--corpus", str(tmp_path / "missing.jsonl"),
                "--kind", "avg",
                "--out", str(tmp_path / "x.tsv"),
                "--model", str(model_dir),
            ]
        )
        assert code == 1
