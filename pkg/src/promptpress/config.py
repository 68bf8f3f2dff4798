"""Engine configuration: a single JSON document, canonicalized and digested.

The config digest is stamped into every artifact so runs can be compared
and reproduced. Backend sections select an implementation by kind: the
deterministic in-memory kinds (seeded / scripted / hash) make whole
pipelines runnable offline, while remote kinds point at HTTP services.
Secrets stay out of the file: remote sections name an environment variable
holding the API key.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import digest_obj
from .backends import (
    AutoregressiveScorer,
    BackendSuite,
    EmbeddingBackend,
    GenerationBackend,
    GenerationParams,
    HashEmbeddingBackend,
    MockGenerationBackend,
    RemoteEmbeddingBackend,
    RemoteGenerationBackend,
    TableScorer,
    UniformScorer,
)
from .compress import CompressionConstraint
from .textseg import FALLBACK_TOKENIZER_ID, QUESTION_MARKER, SENTENCE_MARKER


def _default_descriptor() -> dict:
    return {"kind": "seeded", "seed": 0}

def _default_responder() -> dict:
    return {"kind": "seeded", "seed": 1, "scorer": {"kind": "uniform", "vocab_size": 4}}

def _default_embedder() -> dict:
    return {"kind": "hash", "dim": 32, "seed": 0, "context_sensitive": True}

def _default_constraint() -> dict:
    return {"mode": "ratio", "ratio": 5.0}

def _default_sampling() -> dict:
    return {"max_new_tokens": 256, "temperature": 0.0, "top_p": 1.0}


@dataclass
class EngineConfig:
    descriptor: dict = field(default_factory=_default_descriptor)
    responder: dict = field(default_factory=_default_responder)
    embedder: dict = field(default_factory=_default_embedder)
    tokenizer_id: str = FALLBACK_TOKENIZER_ID
    sentence_marker: str = SENTENCE_MARKER
    question_marker: str = QUESTION_MARKER
    constraint: dict = field(default_factory=_default_constraint)
    sampling: dict = field(default_factory=_default_sampling)
    max_inflight: int = 8
    seed: int = 0
    descriptor_template: str = "query_writer_v1"
    window_tokens: int | None = None
    top_k_logprobs: int = 32
    kl_reduction: str = "sum"
    negatives_per_tuple: int = 8

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def digest(self) -> str:
        return digest_obj(self.as_dict())

    def generation_params(self, **overrides) -> GenerationParams:
        merged = {**self.sampling, **overrides}
        if "stop_sequences" in merged:
            merged["stop_sequences"] = tuple(merged["stop_sequences"])
        return GenerationParams(**merged)

    def default_constraint(self) -> CompressionConstraint:
        return constraint_from_dict(self.constraint)


def constraint_from_dict(data: dict) -> CompressionConstraint:
    return CompressionConstraint(
        mode=data["mode"],
        k=data.get("k"),
        budget_tokens=data.get("budget_tokens"),
        ratio=data.get("ratio"),
    )


def _build_scorer(spec: dict | None):
    if spec is None:
        return None
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return UniformScorer(vocab_size=spec.get("vocab_size", 4))
    if kind == "autoregressive":
        return AutoregressiveScorer(
            vocab_size=spec.get("vocab_size", 8), seed=spec.get("seed", 0)
        )
    if kind == "table":
        return TableScorer(tables=spec.get("tables", {}), vocab_size=spec.get("vocab_size", 4))
    raise ValueError(f"unknown scorer kind {kind!r}")


def build_generation_backend(spec: dict, max_inflight: int = 8) -> GenerationBackend:
    kind = spec.get("kind")
    if kind in ("seeded", "scripted"):
        return MockGenerationBackend(
            script=spec.get("script") if kind == "scripted" else None,
            default_reply=spec.get("default_reply"),
            seed=spec.get("seed", 0),
            scorer=_build_scorer(spec.get("scorer")),
            backend_id=spec.get("backend_id", f"mock-{kind}"),
            max_context_tokens=spec.get("max_context_tokens"),
            supports_logprobs=spec.get("supports_logprobs", True),
        )
    if kind == "remote":
        return RemoteGenerationBackend(
            spec["base_url"],
            backend_id=spec.get("backend_id", "remote-gen"),
            api_key_env=spec.get("api_key_env"),
            timeout_s=spec.get("timeout_s", 60.0),
            max_inflight=max_inflight,
            max_context_tokens=spec.get("max_context_tokens"),
        )
    raise ValueError(f"unknown generation backend kind {kind!r}")


def build_embedding_backend(spec: dict, max_inflight: int = 8) -> EmbeddingBackend:
    kind = spec.get("kind")
    if kind == "hash":
        return HashEmbeddingBackend(
            dim=spec.get("dim", 32),
            seed=spec.get("seed", 0),
            context_sensitive=spec.get("context_sensitive", True),
            pinned=spec.get("pinned"),
            backend_id=spec.get("backend_id", "mock-embed"),
        )
    if kind == "remote":
        return RemoteEmbeddingBackend(
            spec["base_url"],
            dim=spec["dim"],
            backend_id=spec.get("backend_id", "remote-embed"),
            api_key_env=spec.get("api_key_env"),
            timeout_s=spec.get("timeout_s", 60.0),
            max_inflight=max_inflight,
        )
    raise ValueError(f"unknown embedding backend kind {kind!r}")


def build_suite(config: EngineConfig) -> BackendSuite:
    return BackendSuite(
        descriptor=build_generation_backend(config.descriptor, config.max_inflight),
        embedder=build_embedding_backend(config.embedder, config.max_inflight),
        responder=build_generation_backend(config.responder, config.max_inflight),
    )
