"""Deterministic in-memory backends for offline pipelines and tests.

Every mock is a pure function of its construction arguments plus the request,
so pipelines built on them are byte-reproducible. Call counters make request
accounting (bypass rules, cache hits) directly assertable.
"""

from __future__ import annotations

import hashlib
import math
import threading

import numpy as np

from ..errors import BackendRejected, ContextOverflow, LogprobsUnsupported
from ..textseg import (
    FALLBACK_TOKENIZER_ID,
    QUESTION_MARKER,
    MarkedText,
    count_tokens,
    get_tokenizer,
)
from .base import (
    Completion,
    EmbeddingBackend,
    EmbeddingVector,
    GenerationBackend,
    GenerationParams,
    TokenDistribution,
)

_WORDS = (
    "alpha", "bravo", "carbon", "delta", "ember", "falcon", "granite",
    "harbor", "indigo", "juniper", "kestrel", "lumen", "meridian", "nickel",
    "orchid", "prairie",
)


def _digest_int(*parts: str) -> int:
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def stable_token_id(token: str, vocab_size: int) -> int:
    """Deterministic token-string to id mapping shared by the mock scorers."""
    return _digest_int("tok", token) % vocab_size


class UniformScorer:
    """Every position is uniform over a fixed-size vocabulary."""

    def __init__(self, vocab_size: int = 4):
        self.vocab_size = vocab_size

    def rows(self, prompt: str, tokens: list[str]) -> list[list[float]]:
        p = 1.0 / self.vocab_size
        return [[p] * self.vocab_size for _ in tokens]


class TableScorer:
    """Scripted per-prompt probability rows with a fallback scorer.

    tables maps a prompt string to a list of probability rows (one per
    continuation position, indexed by token id). Shorter tables repeat
    their last row. Prompts not in the table fall back to uniform.
    """

    def __init__(self, tables: dict[str, list[list[float]]], vocab_size: int = 4):
        self.tables = tables
        self.vocab_size = vocab_size

    def rows(self, prompt: str, tokens: list[str]) -> list[list[float]]:
        scripted = self.tables.get(prompt)
        if scripted is None:
            p = 1.0 / self.vocab_size
            return [[p] * self.vocab_size for _ in tokens]
        out = []
        for t in range(len(tokens)):
            row = scripted[t] if t < len(scripted) else scripted[-1]
            out.append(list(row))
        return out


class MockGenerationBackend(GenerationBackend):
    """Scripted or seeded generation plus a pluggable scoring model.

    script maps exact prompts to a reply (or list of candidate replies);
    prompts missing from the script fall back to default_reply, then to
    seeded word-salad generation when default_reply is None and seeded
    mode is enabled (script is None).
    """

    def __init__(
        self,
        *,
        script: dict[str, str | list[str]] | None = None,
        default_reply: str | None = None,
        seed: int = 0,
        scorer=None,
        backend_id: str = "mock-gen",
        max_context_tokens: int | None = None,
        supports_logprobs: bool = True,
    ):
        self.script = script
        self.default_reply = default_reply
        self.seed = seed
        self.scorer = scorer if scorer is not None else UniformScorer(4)
        self.backend_id = backend_id
        self.max_context_tokens = max_context_tokens
        self.supports_logprobs = supports_logprobs
        self.calls = {"generate": 0, "score": 0}
        self._lock = threading.Lock()

    def _count(self, kind: str) -> None:
        with self._lock:
            self.calls[kind] += 1

    def _check_window(self, prompt: str) -> None:
        if self.max_context_tokens is not None:
            n = count_tokens(prompt, self.tokenizer_id)
            if n > self.max_context_tokens:
                raise ContextOverflow(
                    f"prompt is {n} tokens; window is {self.max_context_tokens}",
                    overflow_tokens=n - self.max_context_tokens,
                )

    def _seeded_text(self, prompt: str, rank: int, params: GenerationParams) -> str:
        if params.temperature == 0:
            key = _digest_int("greedy", str(self.seed), prompt)
        else:
            key = _digest_int(
                "sample", str(self.seed), str(params.seed), str(rank), prompt
            )
        rng = np.random.default_rng(key)
        n = int(rng.integers(4, 9))
        words = [_WORDS[int(rng.integers(0, len(_WORDS)))] for _ in range(n)]
        return " ".join(words) + "?"

    def generate(self, prompt: str, params: GenerationParams) -> list[Completion]:
        self._count("generate")
        if not prompt:
            raise BackendRejected("empty prompt")
        self._check_window(prompt)
        n = params.num_candidates
        scripted = self.script.get(prompt) if self.script is not None else None
        if scripted is not None:
            pool = [scripted] if isinstance(scripted, str) else list(scripted)
            return [Completion(text=pool[i % len(pool)]) for i in range(n)]
        if self.default_reply is not None:
            return [Completion(text=self.default_reply) for _ in range(n)]
        if self.script is not None:
            raise BackendRejected(f"no scripted reply for prompt of length {len(prompt)}")
        return [Completion(text=self._seeded_text(prompt, i, params)) for i in range(n)]

    def score_continuation(
        self, prompt: str, continuation: str, top_k: int
    ) -> list[TokenDistribution]:
        self._count("score")
        if not self.supports_logprobs:
            raise LogprobsUnsupported(f"{self.backend_id} does not expose distributions")
        self._check_window(prompt + continuation)
        tokens = self.tokenizer.encode(continuation)
        if not tokens:
            raise BackendRejected("continuation holds no tokens")
        rows = self.scorer.rows(prompt, tokens)
        dists = []
        for t, (token, row) in enumerate(zip(tokens, rows)):
            vocab = len(row)
            gold_id = stable_token_id(token, vocab)
            ranked = sorted(range(vocab), key=lambda i: (-row[i], i))
            kept = ranked[: min(top_k, vocab)]
            entries = tuple((i, math.log(row[i])) for i in kept if row[i] > 0)
            dists.append(
                TokenDistribution(
                    position=t,
                    entries=entries,
                    gold_logprob=math.log(row[gold_id]) if row[gold_id] > 0 else -745.0,
                    gold_token_id=gold_id,
                    is_truncated=top_k < vocab,
                )
            )
        return dists

    def gold_loglikelihood(self, prompt: str, continuation: str) -> float:
        if self.supports_logprobs:
            return super().gold_loglikelihood(prompt, continuation)
        self._count("score")
        tokens = self.tokenizer.encode(continuation)
        if not tokens:
            raise BackendRejected("continuation holds no tokens")
        rows = self.scorer.rows(prompt, tokens)
        total = 0.0
        for token, row in zip(tokens, rows):
            gold_id = stable_token_id(token, len(row))
            total += math.log(row[gold_id]) if row[gold_id] > 0 else -745.0
        return total


class AutoregressiveScorer:
    """Pseudo-random rows keyed by the exact token prefix.

    Because the row at position t is a function of (seed, prompt tokens,
    continuation tokens before t), re-splitting the same token stream into
    a longer prompt and shorter continuation reproduces identical rows.
    """

    def __init__(self, vocab_size: int = 8, seed: int = 0):
        self.vocab_size = vocab_size
        self.seed = seed

    def rows(self, prompt: str, tokens: list[str]) -> list[list[float]]:
        prefix = get_tokenizer(FALLBACK_TOKENIZER_ID).encode(prompt)
        out = []
        for t in range(len(tokens)):
            context = prefix + tokens[:t]
            key = _digest_int("ar", str(self.seed), *context)
            rng = np.random.default_rng(key)
            weights = rng.random(self.vocab_size) + 0.1
            total = float(weights.sum())
            out.append([float(w) / total for w in weights])
        return out


class HashEmbeddingBackend(EmbeddingBackend):
    """Embedding mock seeded by content digests.

    With context_sensitive=True the vector for a marked segment depends on
    a digest of all preceding text as well as the segment itself, so the
    same sentence embeds differently in different left contexts. With
    context_sensitive=False only the segment text matters. pinned maps a
    stripped segment text to a fixed vector, letting tests rig exact
    matches between a question and a chosen sentence.
    """

    def __init__(
        self,
        dim: int = 32,
        seed: int = 0,
        context_sensitive: bool = True,
        pinned: dict[str, tuple[float, ...]] | None = None,
        backend_id: str = "mock-embed",
    ):
        self.dim = dim
        self.seed = seed
        self.context_sensitive = context_sensitive
        self.pinned = dict(pinned or {})
        self.backend_id = backend_id
        self.calls = {"embed": 0}
        self._lock = threading.Lock()

    def _vector(self, left_context: str, segment: str) -> tuple[float, ...]:
        stripped = segment.strip()
        if stripped in self.pinned:
            return tuple(float(v) for v in self.pinned[stripped])
        parts = ["emb", str(self.seed), hashlib.sha256(stripped.encode()).hexdigest()]
        if self.context_sensitive:
            parts.append(hashlib.sha256(left_context.encode()).hexdigest())
        rng = np.random.default_rng(_digest_int(*parts))
        return tuple(float(v) for v in rng.standard_normal(self.dim))

    def embed(self, marked: MarkedText) -> list[EmbeddingVector]:
        with self._lock:
            self.calls["embed"] += 1
        parts = marked.text.split(marked.marker)
        n_markers = len(parts) - 1
        if n_markers < 1:
            raise BackendRejected("marked text contains no markers")
        is_question = marked.marker == QUESTION_MARKER
        vectors = []
        for i in range(n_markers):
            tag: int | str = "question" if is_question and n_markers == 1 else i
            values = self._vector("".join(parts[:i]), parts[i])
            vectors.append(EmbeddingVector(values=values, dim=self.dim, source_marker=tag))
        return vectors


class UnavailableBackend(GenerationBackend):
    """Always-down backend for health and error-path tests."""

    def __init__(self, backend_id: str = "down"):
        self.backend_id = backend_id

    def generate(self, prompt, params):
        from ..errors import BackendUnavailable

        raise BackendUnavailable(f"{self.backend_id} is unreachable")

    def score_continuation(self, prompt, continuation, top_k):
        from ..errors import BackendUnavailable

        raise BackendUnavailable(f"{self.backend_id} is unreachable")

    def health(self) -> bool:
        return False
