"""Shared fixtures: seed rows, small corpora, and synthetic embedding stores."""

from importlib import resources

import numpy as np
import pytest

from chunkprobe import blm, corpus, synthetic

SEEDS_EN = str(resources.files("chunkprobe") / "data" / "seeds_en.tsv")
ALTERNATION_EN = str(resources.files("chunkprobe") / "data" / "alternation_en.tsv")


@pytest.fixture(scope="session")
def seed_rows():
    return corpus.parse_seed_file(SEEDS_EN)


@pytest.fixture(scope="session")
def alternation_rows():
    return blm.parse_alternation_file(ALTERNATION_EN)


@pytest.fixture(scope="session")
def all_sentences(seed_rows):
    return corpus.generate_sentences(seed_rows)


@pytest.fixture(scope="session")
def flat_sentences(all_sentences):
    return [rec for group in all_sentences.values() for rec in group]


@pytest.fixture(scope="session")
def sentence_store(flat_sentences):
    """Synthetic embeddings for every generated sentence (seed 123)."""
    pairs = sorted({(r.sentence_id, r.pattern.label) for r in flat_sentences})
    return synthetic.make_synthetic_store(pairs, seed=123)


@pytest.fixture(scope="session")
def small_split(all_sentences):
    """A small but pattern-complete triple dataset (target 140 -> 10/pattern)."""
    rng = np.random.default_rng(0)
    instances = corpus.build_instances(all_sentences, 7, rng)
    return corpus.sample_and_split(instances, 140, rng)
