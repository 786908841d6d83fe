"""Shared fixtures: toy vocabularies, corpus builders, random generators."""

import random

import numpy as np
import pytest

from warmstart.vocab import Vocabulary

# Toy source vocabulary used across tokenizer and transplant tests.
TOY_TOKENS = [
    "<pad>", "</s>", "<unk>",
    "▁here", "▁you", "▁go", "▁doc", "tor", "▁the", "▁document",
]


@pytest.fixture
def toy_vocab():
    return Vocabulary(TOY_TOKENS, sentinel_count=0)


@pytest.fixture
def sentinel_vocab():
    """Size 30, three sentinels: S0=29, S1=28, S2=27."""
    return Vocabulary([f"t{i}" for i in range(30)], sentinel_count=3)


def write_vocab_file(path, tokens):
    path.write_text("\n".join(tokens) + "\n", encoding="utf-8")
    return path


def make_aliasfree_vocab(size, sentinel_count=100):
    """A vocabulary where every regular token greedy-tokenizes to itself.

    Marker-initial and bare tokens use disjoint letter prefixes so the
    marker prepended during tokenization can never redirect a bare token
    onto a marked sibling.
    """
    regular = size - 3 - sentinel_count
    tokens = ["<pad>", "</s>", "<unk>"]
    for i in range(regular):
        if i % 2 == 0:
            tokens.append(f"▁a{i}")
        else:
            tokens.append(f"b{i}")
    # Sentinel k must land on id size-1-k, so the tail is written k-descending.
    tokens.extend(f"<extra_id_{k}>" for k in range(sentinel_count - 1, -1, -1))
    assert len(tokens) == size
    return tokens


def random_embedding(rows, dim, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, dim), dtype=np.float32)


def make_corpus_text(n_words, vocab_words, seed):
    """Deterministic space-separated text over the given word list."""
    rng = random.Random(seed)
    return " ".join(rng.choice(vocab_words) for _ in range(n_words))
