"""Backend contracts, deterministic mocks, and remote HTTP clients."""

from .base import (
    BackendSuite,
    Completion,
    EmbeddingBackend,
    EmbeddingVector,
    GenerationBackend,
    GenerationParams,
    TokenDistribution,
)
from .mocks import (
    AutoregressiveScorer,
    HashEmbeddingBackend,
    MockGenerationBackend,
    TableScorer,
    UnavailableBackend,
    UniformScorer,
    stable_token_id,
)
from .remote import RemoteEmbeddingBackend, RemoteGenerationBackend

__all__ = [
    "AutoregressiveScorer",
    "BackendSuite",
    "Completion",
    "EmbeddingBackend",
    "EmbeddingVector",
    "GenerationBackend",
    "GenerationParams",
    "HashEmbeddingBackend",
    "MockGenerationBackend",
    "RemoteEmbeddingBackend",
    "RemoteGenerationBackend",
    "TableScorer",
    "TokenDistribution",
    "UnavailableBackend",
    "UniformScorer",
    "stable_token_id",
]
