"""Question-to-sentence relevance scoring over context-aware embeddings.

The question and every sentence are embedded at their boundary markers and
compared with cosine similarity. The whole marked document goes through the
embedder in one pass by default so sentence vectors can reflect their
surrounding context; set window_tokens to chunk oversized documents into
consecutive sentence windows instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backends import EmbeddingBackend, EmbeddingVector
from .descriptor import TaskDescription
from .errors import DimensionMismatch, ZeroVector
from .textseg import (
    QUESTION_MARKER,
    SENTENCE_MARKER,
    MarkedText,
    SegmentedContext,
    mark_question,
    mark_sentences,
)


@dataclass(frozen=True)
class RelevanceScore:
    sentence_index: int
    score: float


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; symmetric and scale-invariant."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims differ: {a.dim} vs {b.dim}")
    dot = math.fsum(x * y for x, y in zip(a.values, b.values))
    na = math.sqrt(math.fsum(x * x for x in a.values))
    nb = math.sqrt(math.fsum(y * y for y in b.values))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    return max(-1.0, min(1.0, dot / (na * nb)))


def _window_slices(ctx: SegmentedContext, window_tokens: int) -> list[tuple[int, int]]:
    slices = []
    start = 0
    used = 0
    for i, sent in enumerate(ctx.sentences):
        if i > start and used + sent.token_count > window_tokens:
            slices.append((start, i))
            start, used = i, 0
        used += sent.token_count
    slices.append((start, len(ctx.sentences)))
    return slices


def _marked_window(ctx: SegmentedContext, lo: int, hi: int, marker: str) -> MarkedText:
    text = ctx.document.text
    parts: list[str] = []
    offsets: list[int] = []
    out_len = 0
    pos = ctx.sentences[lo].char_span[0]
    for sent in ctx.sentences[lo:hi]:
        chunk = text[pos:sent.char_span[1]]
        parts.append(chunk)
        out_len += len(chunk)
        offsets.append(out_len)
        parts.append(marker)
        out_len += len(marker)
        pos = sent.char_span[1]
    return MarkedText(text="".join(parts), marker=marker, marker_offsets=tuple(offsets))


def embed_sentences(
    ctx: SegmentedContext,
    emb: EmbeddingBackend,
    sentence_marker: str = SENTENCE_MARKER,
    window_tokens: int | None = None,
) -> list[EmbeddingVector]:
    """One embedding per sentence, in sentence order."""
    if window_tokens is None:
        vectors = emb.embed(mark_sentences(ctx, sentence_marker))
    else:
        vectors = []
        for lo, hi in _window_slices(ctx, window_tokens):
            vectors.extend(emb.embed(_marked_window(ctx, lo, hi, sentence_marker)))
    if len(vectors) != len(ctx.sentences):
        raise DimensionMismatch(
            f"embedder returned {len(vectors)} vectors for {len(ctx.sentences)} sentences"
        )
    return vectors


def score_context(
    q: TaskDescription,
    ctx: SegmentedContext,
    emb: EmbeddingBackend,
    *,
    sentence_marker: str = SENTENCE_MARKER,
    question_marker: str = QUESTION_MARKER,
    window_tokens: int | None = None,
) -> list[RelevanceScore]:
    """Cosine relevance of every sentence to the task description.

    The description text is embedded verbatim, instruction scaffolding
    included, since that is the form the descriptor was built to emit.
    """
    if not ctx.sentences:
        raise ZeroVector("cannot score an empty context")
    q_vectors = emb.embed(mark_question(q.text, question_marker))
    if len(q_vectors) != 1:
        raise DimensionMismatch(f"expected 1 question vector, got {len(q_vectors)}")
    q_vec = q_vectors[0]
    sent_vectors = embed_sentences(ctx, emb, sentence_marker, window_tokens)
    return [
        RelevanceScore(sentence_index=i, score=cosine(q_vec, v))
        for i, v in enumerate(sent_vectors)
    ]
