"""KL-divergence reward for compressed prompts and best-of-n selection.

A candidate task description earns reward 0 when compressing with it leaves
the response distribution untouched, and a negative reward that grows with
the divergence otherwise. The response is generated once from the full
prompt and reused across all candidates; the best candidate (ties to the
lowest rank) is emitted as a supervised fine-tuning record for an external
trainer.

Per-position KL is computed under teacher forcing on the gold response and
reduced (sum by default, mean available). Truncated top-k distributions are
aligned on the union of their supports plus the gold token, remaining mass
pooled into an OTHER bucket, with 1e-10 smoothing before renormalization.
"""

from __future__ import annotations

import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import read_jsonl, write_jsonl, write_manifest
from .backends import BackendSuite, GenerationBackend, GenerationParams, TokenDistribution
from .compress import CompressedPrompt, CompressionConstraint, compress
from .descriptor import TaskDescription, describe_candidates
from .errors import EmptyCompressionPool, LogprobsUnsupported, SupportViolation
from .textseg import FALLBACK_TOKENIZER_ID, RawDocument, Tokenizer, segment

REDUCTION_SUM = "sum"
REDUCTION_MEAN = "mean"

_EPS = 1e-10


@dataclass
class RewardRecord:
    """One candidate's reward plus the evidence behind it."""

    reward: float
    per_position_kl: tuple[float, ...]
    reduction: str
    truncation_note: bool = False
    surrogate: bool = False
    candidate: TaskDescription | None = None
    compressed: CompressedPrompt | None = None


@dataclass
class SftRecord:
    """A (long prompt, best task description) pair for an external trainer."""

    prompt: str
    target: str
    reward: float
    candidate_pool_size: int
    provenance: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {
            "prompt": self.prompt,
            "target": self.target,
            "reward": self.reward,
            "candidate_pool_size": self.candidate_pool_size,
            "provenance": self.provenance,
        }


def kl_categorical(p_dist, q_dist) -> float:
    """KL(p || q) over two aligned probability vectors.

    Inputs must already be normalized (sum within 1e-9 of 1). Raises
    SupportViolation where q is zero but p carries mass.
    """
    p = [float(x) for x in p_dist]
    q = [float(x) for x in q_dist]
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    if any(x < 0 for x in p) or any(x < 0 for x in q):
        raise ValueError("probabilities must be non-negative")
    if abs(math.fsum(p) - 1.0) > 1e-9 or abs(math.fsum(q) - 1.0) > 1e-9:
        raise ValueError("distributions must sum to 1 within 1e-9")
    total = 0.0
    for pi, qi in zip(p, q):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise SupportViolation("q has zero mass where p does not")
        total += pi * math.log(pi / qi)
    if total < 0.0:
        if total < -1e-9:
            raise AssertionError(f"KL came out negative: {total}")
        total = 0.0
    return total


def _aligned_probs(left: TokenDistribution, right: TokenDistribution) -> tuple[list[float], list[float]]:
    """Project two truncated distributions onto a shared support.

    Support is the union of both entry sets plus both gold tokens; mass not
    covered by a side's entries goes to a final OTHER bucket. Both sides are
    smoothed and renormalized so KL is always defined.
    """
    ids = {i for i, _ in left.entries} | {i for i, _ in right.entries}
    for dist in (left, right):
        if dist.gold_token_id is not None:
            ids.add(dist.gold_token_id)
    support = sorted(ids)

    def side(dist: TokenDistribution) -> list[float]:
        known = dict(dist.entries)
        if dist.gold_token_id is not None:
            known.setdefault(dist.gold_token_id, dist.gold_logprob)
        probs = [math.exp(known[i]) if i in known else 0.0 for i in support]
        probs.append(max(0.0, 1.0 - math.fsum(probs)))
        smoothed = [x + _EPS for x in probs]
        norm = math.fsum(smoothed)
        return [x / norm for x in smoothed]

    return side(left), side(right)


def _reduce(values: list[float], reduction: str) -> float:
    if reduction == REDUCTION_SUM:
        return math.fsum(values)
    if reduction == REDUCTION_MEAN:
        return math.fsum(values) / len(values) if values else 0.0
    raise ValueError(f"unknown reduction {reduction!r}")


def response_reward(
    backend: GenerationBackend,
    full_prompt: str,
    compressed_prompt: str,
    response: str,
    top_k: int = 32,
    reduction: str = REDUCTION_SUM,
) -> RewardRecord:
    """Negative divergence of the response distribution after compression.

    The compressed-prompt distribution is the left KL argument. Identical
    prompts give reward 0 exactly. Backends without distributions degrade
    to a log-likelihood-gap surrogate, flagged on the record and excluded
    from acceptance accounting.
    """
    if not response.strip():
        raise ValueError("response is empty")
    try:
        under_compressed = backend.score_continuation(compressed_prompt, response, top_k)
        under_full = backend.score_continuation(full_prompt, response, top_k)
    except LogprobsUnsupported:
        gap = abs(
            backend.gold_loglikelihood(compressed_prompt, response)
            - backend.gold_loglikelihood(full_prompt, response)
        )
        return RewardRecord(
            reward=0.0 - gap,
            per_position_kl=(),
            reduction=reduction,
            truncation_note=True,
            surrogate=True,
        )
    if len(under_compressed) != len(under_full):
        raise ValueError(
            f"position counts differ: {len(under_compressed)} vs {len(under_full)}"
        )
    per_position = []
    for left, right in zip(under_compressed, under_full):
        p, q = _aligned_probs(left, right)
        per_position.append(kl_categorical(p, q))
    return RewardRecord(
        reward=0.0 - _reduce(per_position, reduction),
        per_position_kl=tuple(per_position),
        reduction=reduction,
        truncation_note=any(
            d.is_truncated for d in (*under_compressed, *under_full)
        ),
    )


class ResponseCache:
    """Concurrent map of (backend id, prompt digest) to a generated response."""

    def __init__(self):
        self._entries: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _key(backend: GenerationBackend, prompt: str) -> tuple[str, str]:
        return backend.backend_id, hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def get(self, backend: GenerationBackend, prompt: str) -> str | None:
        with self._lock:
            return self._entries.get(self._key(backend, prompt))

    def put(self, backend: GenerationBackend, prompt: str, response: str) -> None:
        with self._lock:
            self._entries.setdefault(self._key(backend, prompt), response)


def generate_response(
    backend: GenerationBackend,
    full_prompt: str,
    params: GenerationParams | None = None,
    cache: ResponseCache | None = None,
) -> str:
    """One greedy completion of the full prompt, cached by prompt digest."""
    if cache is not None:
        hit = cache.get(backend, full_prompt)
        if hit is not None:
            return hit
    params = params or GenerationParams()
    response = backend.generate(full_prompt, params)[0].text
    if cache is not None:
        cache.put(backend, full_prompt, response)
    return response


def refine_step(
    document: RawDocument,
    suite: BackendSuite,
    n_candidates: int,
    constraint: CompressionConstraint,
    *,
    params: GenerationParams | None = None,
    top_k: int = 32,
    reduction: str = REDUCTION_SUM,
    cache: ResponseCache | None = None,
    tokenizer: Tokenizer | str = FALLBACK_TOKENIZER_ID,
    run_id: str = "",
    config_digest: str = "",
    max_workers: int = 1,
) -> tuple[SftRecord, list[RewardRecord]]:
    """One best-of-n pass: sample candidates, reward each, keep the best.

    The response is generated once from the uncompressed prompt and shared
    across candidates. Candidates whose compression comes out empty are not
    scored; if that is all of them, EmptyCompressionPool is raised.
    """
    if n_candidates < 2:
        raise ValueError("refinement needs at least 2 candidates")
    params = params or GenerationParams(temperature=0.8, seed=0)
    candidates = describe_candidates(document, suite.descriptor, n_candidates, params)
    ctx = segment(document, tokenizer)
    response = generate_response(suite.responder, document.text, cache=cache)

    def evaluate(candidate: TaskDescription) -> RewardRecord | None:
        compressed = compress(ctx, candidate, constraint, suite.embedder)
        if not compressed.selected:
            return None
        record = response_reward(
            suite.responder,
            document.text,
            compressed.text,
            response,
            top_k=top_k,
            reduction=reduction,
        )
        record.candidate = candidate
        record.compressed = compressed
        return record

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            evaluated = list(pool.map(evaluate, candidates))
    else:
        evaluated = [evaluate(c) for c in candidates]

    records = [r for r in evaluated if r is not None]
    if not records:
        raise EmptyCompressionPool(
            f"all {n_candidates} candidates compressed document {document.id!r} to nothing"
        )
    best = records[0]
    for record in records[1:]:
        if record.reward > best.reward:
            best = record
    sft = SftRecord(
        prompt=document.text,
        target=best.candidate.text,
        reward=best.reward,
        candidate_pool_size=n_candidates,
        provenance={"run_id": run_id, "config_digest": config_digest},
    )
    return sft, records


def emit_sft_dataset(
    records: list[SftRecord],
    path: str | Path,
    *,
    run_id: str,
    config_digest: str,
) -> dict:
    """Write records as JSON-Lines plus a counted manifest; returns the manifest."""
    count = write_jsonl(path, (r.as_row() for r in records))
    return write_manifest(path, run_id=run_id, config_digest=config_digest, count=count)


def load_sft_dataset(path: str | Path) -> list[SftRecord]:
    return [
        SftRecord(
            prompt=row["prompt"],
            target=row["target"],
            reward=row["reward"],
            candidate_pool_size=row["candidate_pool_size"],
            provenance=row.get("provenance", {}),
        )
        for row in read_jsonl(path)
    ]
