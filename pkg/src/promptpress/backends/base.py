"""Contracts for generation (with log-probabilities) and embedding backends.

Two contracts rather than one because real deployments use different models
for description generation / response scoring than for sentence embedding.
All implementations must be safe to share across concurrent pipeline tasks.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..errors import DimensionMismatch, InvalidSampling, NonFiniteVector
from ..textseg import FALLBACK_TOKENIZER_ID, MarkedText, Tokenizer, get_tokenizer


@dataclass(frozen=True)
class GenerationParams:
    """Sampling controls for a generation request."""

    max_new_tokens: int = 256
    temperature: float = 0.0
    top_p: float = 1.0
    num_candidates: int = 1
    seed: int | None = None
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise InvalidSampling("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise InvalidSampling("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise InvalidSampling("top_p must be in (0, 1]")
        if self.num_candidates < 1:
            raise InvalidSampling("num_candidates must be >= 1")
        if self.temperature == 0 and self.num_candidates > 1:
            raise InvalidSampling("temperature 0 is greedy; num_candidates must be 1")


@dataclass(frozen=True)
class Completion:
    text: str


@dataclass(frozen=True)
class TokenDistribution:
    """Next-token distribution at one position of a scored continuation.

    entries hold (token_id, log_probability) pairs sorted by descending
    log-probability; the gold (forced) token's log-probability is always
    carried, even when the gold token did not make the top-k cut.
    """

    position: int
    entries: tuple[tuple[int, float], ...]
    gold_logprob: float
    gold_token_id: int | None = None
    is_truncated: bool = False

    def __post_init__(self):
        for _, lp in self.entries:
            if not math.isfinite(lp) or lp > 0:
                raise ValueError(f"log-probability out of range: {lp}")
        if not math.isfinite(self.gold_logprob) or self.gold_logprob > 0:
            raise ValueError(f"gold log-probability out of range: {self.gold_logprob}")
        ordered = tuple(sorted(self.entries, key=lambda e: (-e[1], e[0])))
        object.__setattr__(self, "entries", ordered)


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-width embedding read at a boundary marker."""

    values: tuple[float, ...]
    dim: int
    source_marker: int | str | None = None

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise DimensionMismatch(
                f"vector claims dim {self.dim} but holds {len(self.values)} values"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise NonFiniteVector("embedding contains NaN or Inf")


class GenerationBackend(ABC):
    """Text generation plus teacher-forced continuation scoring."""

    backend_id: str = "generation"
    max_context_tokens: int | None = None
    tokenizer_id: str = FALLBACK_TOKENIZER_ID

    @property
    def tokenizer(self) -> Tokenizer:
        return get_tokenizer(self.tokenizer_id)

    @abstractmethod
    def generate(self, prompt: str, params: GenerationParams) -> list[Completion]:
        """Return exactly params.num_candidates completions for the prompt."""

    @abstractmethod
    def score_continuation(
        self, prompt: str, continuation: str, top_k: int
    ) -> list[TokenDistribution]:
        """Teacher-forced scoring: one distribution per continuation token.

        Each position is conditioned on prompt plus the gold continuation
        prefix. Raises LogprobsUnsupported when the backend cannot return
        distributions.
        """

    def gold_loglikelihood(self, prompt: str, continuation: str) -> float:
        """Total log-likelihood of the continuation under teacher forcing."""
        dists = self.score_continuation(prompt, continuation, top_k=1)
        return sum(d.gold_logprob for d in dists)

    def health(self) -> bool:
        return True


class EmbeddingBackend(ABC):
    """Marker-addressed embeddings over marked text."""

    backend_id: str = "embedding"
    dim: int = 0

    @abstractmethod
    def embed(self, marked: MarkedText) -> list[EmbeddingVector]:
        """Return one vector per marker, in marker order, all of width dim."""

    def health(self) -> bool:
        return True


@dataclass(frozen=True)
class BackendSuite:
    """The three model roles a full pipeline needs.

    descriptor writes task descriptions, responder answers prompts and
    scores continuations, embedder produces sentence/question vectors.
    Compression-only deployments may leave responder as None.
    """

    descriptor: GenerationBackend | None
    embedder: EmbeddingBackend
    responder: GenerationBackend | None = None
