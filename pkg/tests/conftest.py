"""Shared fixtures: deterministic backend suites and a synthetic corpus."""

from __future__ import annotations

import numpy as np
import pytest

from promptpress.backends import (
    BackendSuite,
    HashEmbeddingBackend,
    MockGenerationBackend,
    UniformScorer,
)
from promptpress.textseg import RawDocument

_VOCAB = np.array([
    "alder", "basalt", "cobalt", "darnel", "ebony", "fennel", "garnet",
    "hazel", "iris", "jasper", "kelp", "laurel", "maple", "nectar",
    "ochre", "pewter", "quartz", "rowan", "sable", "tarragon", "umber",
    "vervain", "walnut", "yarrow", "zephyr", "amber", "birch", "cedar",
    "damson", "elder", "flint", "gorse", "heather", "ivy", "juniper",
    "larch", "moss", "nettle", "osier", "poplar",
])


def synthetic_document(rng: np.random.Generator, doc_id: str,
                       lo: int = 8000, hi: int = 12000) -> RawDocument:
    """One document of lo..hi fallback-tokenizer tokens, sentences <= 100 tokens."""
    target = int(rng.integers(lo + 100, hi - 100))
    lengths: list[int] = []
    total = 0
    while True:
        n_words = int(rng.integers(5, 100))
        if total + n_words + 1 > target:
            break
        lengths.append(n_words)
        total += n_words + 1
    stream = rng.choice(_VOCAB, size=sum(lengths))
    sentences = []
    pos = 0
    for n_words in lengths:
        words = stream[pos:pos + n_words]
        pos += n_words
        sentences.append(" ".join(words).capitalize() + ".")
    return RawDocument(id=doc_id, text=" ".join(sentences))


def synthetic_corpus(n_docs: int, seed: int = 0, lo: int = 8000, hi: int = 12000):
    rng = np.random.default_rng(seed)
    return [synthetic_document(rng, f"doc{i:03d}", lo, hi) for i in range(n_docs)]


@pytest.fixture
def small_doc() -> RawDocument:
    return RawDocument(
        id="small",
        text=(
            "The reservoir gauge read nine meters at dawn. Engineers logged a slow "
            "decline through the morning. A valve on the north intake had seized "
            "overnight. The maintenance crew freed it before noon. Downstream flow "
            "recovered within the hour."
        ),
    )


@pytest.fixture
def mock_suite() -> BackendSuite:
    return BackendSuite(
        descriptor=MockGenerationBackend(seed=11, backend_id="descriptor"),
        embedder=HashEmbeddingBackend(dim=16, seed=5),
        responder=MockGenerationBackend(
            seed=23, backend_id="responder", scorer=UniformScorer(4)
        ),
    )
