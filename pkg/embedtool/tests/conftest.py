"""Shared fixtures: a miniature local encoder and a small corpus file.

The test environment cannot download model checkpoints, so the encoder
is built here from scratch: a 2-layer BERT with hidden size 32, mean
pooling, and a dense projection up to 384 dimensions, saved to a temp
directory and loaded back by path exactly like any other model.
"""

import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import json

import pytest
import torch
from sentence_transformers import SentenceTransformer
from transformers import BertConfig, BertModel, BertTokenizerFast

try:  # the building-block modules moved in newer sentence-transformers
    from sentence_transformers.sentence_transformer import modules as st_modules
except ImportError:
    from sentence_transformers import models as st_modules

VOCAB_WORDS = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "of", "and", "a", "in", "market", "model", "data",
    "price", "return", "trading", "volatility", "momentum",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("encoder")
    bert_dir = root / "bert"
    bert_dir.mkdir()

    vocab = list(VOCAB_WORDS)
    vocab += list("abcdefghijklmnopqrstuvwxyz0123456789")
    vocab += ["##" + c for c in "abcdefghijklmnopqrstuvwxyz0123456789"]
    (bert_dir / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")

    tokenizer = BertTokenizerFast(vocab_file=str(bert_dir / "vocab.txt"), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(7)
    BertModel(config).save_pretrained(bert_dir)
    tokenizer.save_pretrained(bert_dir)

    word = st_modules.Transformer(str(bert_dir), max_seq_length=64)
    dim_getter = getattr(word, "get_embedding_dimension", None) or word.get_word_embedding_dimension
    pooling = st_modules.Pooling(dim_getter(), pooling_mode="mean")
    dense = st_modules.Dense(
        in_features=dim_getter(),
        out_features=384,
        activation_function=torch.nn.Tanh(),
    )
    encoder = SentenceTransformer(modules=[word, pooling, dense], device="cpu")
    out_dir = root / "st"
    encoder.save(str(out_dir))
    return out_dir


@pytest.fixture()
def corpus_path(tmp_path):
    """Four documents; the third has no abstract and must be skipped."""
    rows = [
        {"id": "doc-a", "title": "Momentum in prices", "abstract": "Returns trend in the data."},
        {"id": "doc-b", "title": "Volatility models", "abstract": "A model of market volatility."},
        {"id": "doc-c", "title": "No abstract here", "abstract": ""},
        {"id": "doc-d", "title": "Trading and data", "abstract": "Price data and trading returns."},
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path
