"""Budget-constrained sentence selection and compressed-prompt assembly.

Sentences are ranked by relevance and taken greedily until the budget is
exhausted; output always preserves original document order. Three
constraint modes: a fixed sentence count (top-k), an absolute token budget,
and a compression ratio that resolves to a budget.

Budget selection fills in rank order and stops at the first sentence that
does not fit the remaining budget (recorded in dropped_oversize). Stopping
rather than skipping ahead keeps selection monotone in the budget: raising
the budget can only ever add sentences, never swap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backends import EmbeddingBackend
from .descriptor import TaskDescription
from .relevance import RelevanceScore, score_context
from .textseg import QUESTION_MARKER, SENTENCE_MARKER, SegmentedContext

MODE_TOP_K = "top_k_count"
MODE_BUDGET = "token_budget"
MODE_RATIO = "ratio"

WARN_EMPTY_SELECTION = "empty_selection"


@dataclass(frozen=True)
class CompressionConstraint:
    """Exactly one of k / budget_tokens / ratio is set, matching mode."""

    mode: str
    k: int | None = None
    budget_tokens: int | None = None
    ratio: float | None = None

    def __post_init__(self):
        set_fields = [
            name
            for name, value in (
                ("k", self.k),
                ("budget_tokens", self.budget_tokens),
                ("ratio", self.ratio),
            )
            if value is not None
        ]
        expected = {MODE_TOP_K: "k", MODE_BUDGET: "budget_tokens", MODE_RATIO: "ratio"}.get(
            self.mode
        )
        if expected is None:
            raise ValueError(f"unknown constraint mode {self.mode!r}")
        if set_fields != [expected]:
            raise ValueError(f"mode {self.mode} requires exactly {expected}, got {set_fields}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.budget_tokens is not None and self.budget_tokens < 1:
            raise ValueError("budget_tokens must be >= 1")
        if self.ratio is not None and self.ratio <= 1:
            raise ValueError("ratio must be > 1")

    @classmethod
    def top_k(cls, k: int) -> "CompressionConstraint":
        return cls(mode=MODE_TOP_K, k=k)

    @classmethod
    def budget(cls, budget_tokens: int) -> "CompressionConstraint":
        return cls(mode=MODE_BUDGET, budget_tokens=budget_tokens)

    @classmethod
    def from_ratio(cls, ratio: float) -> "CompressionConstraint":
        return cls(mode=MODE_RATIO, ratio=ratio)

    def resolve_budget(self, total_tokens: int) -> int | None:
        """Token budget for this constraint, or None in top-k mode."""
        if self.mode == MODE_BUDGET:
            return self.budget_tokens
        if self.mode == MODE_RATIO:
            return math.floor(total_tokens / self.ratio)
        return None


@dataclass(frozen=True)
class CompressedPrompt:
    """Selected sentences in original order plus token accounting."""

    selected: tuple[RelevanceScore, ...]
    text: str
    total_tokens: int
    achieved_ratio: float
    dropped_oversize: tuple[int, ...] = ()
    warning: str | None = None

    @property
    def selected_indices(self) -> tuple[int, ...]:
        return tuple(s.sentence_index for s in self.selected)


def rank_by_score(scores: list[RelevanceScore]) -> list[RelevanceScore]:
    """Descending score, ties broken by lower sentence index."""
    return sorted(scores, key=lambda s: (-s.score, s.sentence_index))


def select_top_k(scores: list[RelevanceScore], k: int) -> set[int]:
    """Indices of the min(k, n) highest-scoring sentences."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return {s.sentence_index for s in rank_by_score(scores)[:k]}


def join_sentences(ctx: SegmentedContext, indices: list[int]) -> str:
    """Concatenate the given sentences in index order.

    Sentences adjacent in the source keep their original gap; a single
    space joins the rest, so token accounting stays stable.
    """
    parts: list[str] = []
    prev: int | None = None
    for i in sorted(indices):
        if prev is not None:
            parts.append(ctx.gap_before(i) if i == prev + 1 else " ")
        parts.append(ctx.sentences[i].text)
        prev = i
    return "".join(parts)


def _assemble(
    ctx: SegmentedContext,
    scores: list[RelevanceScore],
    chosen: set[int],
    dropped: tuple[int, ...],
) -> CompressedPrompt:
    by_index = {s.sentence_index: s for s in scores}
    selected = tuple(by_index[i] for i in sorted(chosen))
    total = sum(ctx.sentences[i].token_count for i in sorted(chosen))
    ratio = ctx.total_tokens / total if total > 0 else math.inf
    return CompressedPrompt(
        selected=selected,
        text=join_sentences(ctx, sorted(chosen)),
        total_tokens=total,
        achieved_ratio=ratio,
        dropped_oversize=dropped,
        warning=None if chosen else WARN_EMPTY_SELECTION,
    )


def select_under_budget(
    scores: list[RelevanceScore], ctx: SegmentedContext, budget_tokens: int
) -> CompressedPrompt:
    """Greedy fill by relevance rank under a hard token budget.

    Walks sentences in rank order, adding each while it fits; the first
    sentence that does not fit ends the walk and is recorded in
    dropped_oversize. The budget is never exceeded; an empty result is
    valid and flagged with a warning.
    """
    if budget_tokens < 1:
        raise ValueError("budget_tokens must be >= 1")
    remaining = budget_tokens
    chosen: set[int] = set()
    dropped: tuple[int, ...] = ()
    for s in rank_by_score(scores):
        cost = ctx.sentences[s.sentence_index].token_count
        if cost > remaining:
            dropped = (s.sentence_index,)
            break
        chosen.add(s.sentence_index)
        remaining -= cost
    return _assemble(ctx, scores, chosen, dropped)


def compress_scored(
    ctx: SegmentedContext,
    scores: list[RelevanceScore],
    constraint: CompressionConstraint,
) -> CompressedPrompt:
    """Apply a constraint to precomputed relevance scores."""
    if constraint.mode == MODE_TOP_K:
        return _assemble(ctx, scores, select_top_k(scores, constraint.k), ())
    budget = constraint.resolve_budget(ctx.total_tokens)
    if budget < 1:
        return _assemble(ctx, scores, set(), ())
    return select_under_budget(scores, ctx, budget)


def compress(
    ctx: SegmentedContext,
    q: TaskDescription,
    constraint: CompressionConstraint,
    emb: EmbeddingBackend,
    *,
    sentence_marker: str = SENTENCE_MARKER,
    question_marker: str = QUESTION_MARKER,
    window_tokens: int | None = None,
) -> CompressedPrompt:
    """Score the context against the task description, then select."""
    scores = score_context(
        q,
        ctx,
        emb,
        sentence_marker=sentence_marker,
        question_marker=question_marker,
        window_tokens=window_tokens,
    )
    return compress_scored(ctx, scores, constraint)
