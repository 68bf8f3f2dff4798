"""Pipeline facade shared by the CLI, the HTTP service, and the harness.

Holds one config and one backend suite, and exposes the operations clients
care about: compress a text (bypassing description generation whenever an
explicit question is supplied), run a best-of-n refinement step, and
evaluate a case set. Every output carries the config digest and a
deterministic run id.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backends import BackendSuite
from .compress import CompressedPrompt, CompressionConstraint, compress
from .config import EngineConfig, build_suite
from .descriptor import TaskDescription, describe
from .artifacts import make_run_id
from .errors import EmptyQuestion
from .reward import ResponseCache, RewardRecord, SftRecord, refine_step
from .textseg import RawDocument, SegmentedContext, segment


@dataclass(frozen=True)
class CompressionOutcome:
    context: SegmentedContext
    task_description: TaskDescription
    compressed: CompressedPrompt

    @property
    def question_supplied(self) -> bool:
        return self.task_description.origin == "user_supplied"


class CompressionEngine:
    def __init__(self, config: EngineConfig, suite: BackendSuite | None = None):
        self.config = config
        self.suite = suite if suite is not None else build_suite(config)
        self.config_digest = config.digest
        self.run_id = make_run_id(self.config_digest, config.seed)
        self._cache = ResponseCache()

    @classmethod
    def from_config(cls, config: EngineConfig) -> "CompressionEngine":
        return cls(config)

    def compress_text(
        self,
        text: str,
        *,
        question: str | None = None,
        constraint: CompressionConstraint | None = None,
        doc_id: str = "doc",
    ) -> CompressionOutcome:
        """Compress a document, guided by the question when one is given.

        With an explicit question the descriptor backend is never called;
        the output is exactly question-conditioned compression.
        """
        doc = RawDocument(id=doc_id, text=text)
        ctx = segment(doc, self.config.tokenizer_id)
        if question is not None:
            if not question.strip():
                raise EmptyQuestion("explicit question is empty")
            task = TaskDescription.from_user(question)
        else:
            task = describe(
                doc,
                self.suite.descriptor,
                params=self.config.generation_params(),
                template=self.config.descriptor_template,
            )
        compressed = compress(
            ctx,
            task,
            constraint or self.config.default_constraint(),
            self.suite.embedder,
            sentence_marker=self.config.sentence_marker,
            question_marker=self.config.question_marker,
            window_tokens=self.config.window_tokens,
        )
        return CompressionOutcome(context=ctx, task_description=task, compressed=compressed)

    def refine(
        self,
        document: RawDocument,
        n_candidates: int,
        constraint: CompressionConstraint | None = None,
    ) -> tuple[SftRecord, list[RewardRecord]]:
        params = self.config.generation_params(
            temperature=max(self.config.sampling.get("temperature", 0.0), 0.7),
            seed=self.config.seed,
        )
        return refine_step(
            document,
            self.suite,
            n_candidates,
            constraint or self.config.default_constraint(),
            params=params,
            top_k=self.config.top_k_logprobs,
            reduction=self.config.kl_reduction,
            cache=self._cache,
            tokenizer=self.config.tokenizer_id,
            run_id=self.run_id,
            config_digest=self.config_digest,
        )

    def health(self) -> dict[str, str]:
        status = {}
        for name in ("descriptor", "embedder", "responder"):
            backend = getattr(self.suite, name)
            if backend is None:
                continue
            status[name] = "ok" if backend.health() else "down"
        return status
