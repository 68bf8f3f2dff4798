"""Task-description generation from long prompts, with likelihood evaluation.

A generation backend turns a long document into a short description of what
the document is asking for; that description then drives sentence scoring.
When the caller already has an explicit question, this whole module is
bypassed. The nll helper evaluates how likely a target description is under
a backend, which is the quantity an external trainer would minimize.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .backends import Completion, GenerationBackend, GenerationParams
from .errors import DescriptionEmpty, InvalidSampling
from .templates import render
from .textseg import RawDocument

ORIGIN_GENERATED = "generated"
ORIGIN_USER = "user_supplied"

DEFAULT_DESCRIPTOR_TEMPLATE = "query_writer_v1"


@dataclass(frozen=True)
class TaskDescription:
    """A query or task description used to guide compression."""

    text: str
    origin: str
    candidate_rank: int | None = None
    gen_params: GenerationParams | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise DescriptionEmpty("task description is empty")
        if self.origin not in (ORIGIN_GENERATED, ORIGIN_USER):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.origin == ORIGIN_USER and self.gen_params is not None:
            raise ValueError("user-supplied descriptions carry no generation params")

    @classmethod
    def from_user(cls, text: str) -> "TaskDescription":
        return cls(text=text, origin=ORIGIN_USER)


def build_descriptor_prompt(
    document_text: str, template: str = DEFAULT_DESCRIPTOR_TEMPLATE
) -> str:
    """Wrap the document in the named instruction template, verbatim."""
    return render(template, text=document_text)


def describe(
    document: RawDocument,
    backend: GenerationBackend,
    params: GenerationParams | None = None,
    template: str = DEFAULT_DESCRIPTOR_TEMPLATE,
) -> TaskDescription:
    """Generate a single task description for the document.

    Decoding defaults to greedy for determinism; pass sampling params to
    override. Raises DescriptionEmpty when the backend returns whitespace.
    """
    params = params or GenerationParams()
    prompt = build_descriptor_prompt(document.text, template)
    completion = backend.generate(prompt, dataclasses.replace(params, num_candidates=1))[0]
    text = completion.text.strip()
    if not text:
        raise DescriptionEmpty(f"backend returned whitespace for document {document.id!r}")
    return TaskDescription(text=text, origin=ORIGIN_GENERATED, gen_params=params)


def describe_candidates(
    document: RawDocument,
    backend: GenerationBackend,
    n: int,
    params: GenerationParams,
    template: str = DEFAULT_DESCRIPTOR_TEMPLATE,
) -> list[TaskDescription]:
    """Sample n candidate descriptions, ranked 0..n-1 in return order.

    Duplicates are kept as-is; deduplicating would silently change the
    best-of-n distribution downstream.
    """
    if n < 1:
        raise InvalidSampling("n must be >= 1")
    if n > 1 and params.temperature <= 0:
        raise InvalidSampling("sampling n > 1 candidates requires temperature > 0")
    prompt = build_descriptor_prompt(document.text, template)
    completions = backend.generate(prompt, dataclasses.replace(params, num_candidates=n))
    if len(completions) != n:
        raise ValueError(f"backend returned {len(completions)} completions for n={n}")
    out = []
    for rank, completion in enumerate(completions):
        text = completion.text.strip()
        if not text:
            raise DescriptionEmpty(f"candidate {rank} is empty for document {document.id!r}")
        out.append(
            TaskDescription(
                text=text, origin=ORIGIN_GENERATED, candidate_rank=rank, gen_params=params
            )
        )
    return out


@dataclass(frozen=True)
class NllResult:
    """Teacher-forced negative log-likelihood of a target description."""

    total: float
    per_token_mean: float
    token_count: int


def nll(backend: GenerationBackend, prompt: str, target: str, top_k: int = 1) -> NllResult:
    """Negative sum of gold-token log-probabilities of target given prompt."""
    dists = backend.score_continuation(prompt, target, top_k=top_k)
    total = -sum(d.gold_logprob for d in dists)
    total = 0.0 + total
    return NllResult(total=total, per_token_mean=total / len(dists), token_count=len(dists))
