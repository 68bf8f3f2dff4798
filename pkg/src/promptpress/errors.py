"""Exception hierarchy shared across the engine.

Everything raised on purpose derives from EngineError so callers (CLI,
service) can map failures to exit codes / HTTP statuses in one place.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine-raised errors."""


class EmptyDocument(EngineError):
    """Document text is empty or whitespace-only."""


class EmptyQuestion(EngineError):
    """Question text is empty or whitespace-only."""


class MarkerCollision(EngineError):
    """Input text already contains the literal marker string."""


class UnknownTokenizer(EngineError):
    """tokenizer_id is not present in the registry."""


class BackendError(EngineError):
    """Base class for model-backend failures."""


class BackendUnavailable(BackendError):
    """Transport-level failure; safe to retry."""


class BackendRejected(BackendError):
    """Backend refused the request (4xx class); retrying wastes budget."""


class ContextOverflow(BackendError):
    """Prompt exceeds the backend's context window."""

    def __init__(self, message: str, overflow_tokens: int = 0):
        super().__init__(message)
        self.overflow_tokens = overflow_tokens


class LogprobsUnsupported(BackendError):
    """Backend cannot return per-token distributions."""


class DimensionMismatch(EngineError):
    """Vector widths (or vector counts) disagree."""


class ZeroVector(EngineError):
    """Cosine similarity is undefined for a zero vector."""


class NonFiniteVector(EngineError):
    """Embedding contains NaN or Inf; never clamped, always fatal."""


class SupportViolation(EngineError):
    """KL divergence undefined: q is zero where p has mass."""


class DescriptionEmpty(EngineError):
    """Generation backend returned whitespace for a task description."""


class InvalidSampling(EngineError):
    """Sampling parameters are inconsistent (e.g. n > 1 at temperature 0)."""


class EmptyCompressionPool(EngineError):
    """Every candidate task description produced an empty compression."""


class ParseFailure(EngineError):
    """A structured model response could not be parsed.

    The offending text is retained for audit.
    """

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text
