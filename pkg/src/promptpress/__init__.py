"""Sentence-level prompt compression engine and its data pipelines."""

__version__ = "0.1.0"

from .backends import BackendSuite, GenerationParams
from .compress import CompressedPrompt, CompressionConstraint, compress
from .config import EngineConfig
from .descriptor import TaskDescription, describe
from .engine import CompressionEngine
from .textseg import RawDocument, SegmentedContext, segment

__all__ = [
    "BackendSuite",
    "CompressedPrompt",
    "CompressionConstraint",
    "CompressionEngine",
    "EngineConfig",
    "GenerationParams",
    "RawDocument",
    "SegmentedContext",
    "TaskDescription",
    "__version__",
    "compress",
    "describe",
    "segment",
]
