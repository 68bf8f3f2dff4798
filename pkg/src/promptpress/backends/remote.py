"""HTTP JSON clients for remote generation and embedding services.

Wire protocol:
  POST {base_url}/generate  {"prompt": str, "params": {...}}
      -> {"completions": [str, ...]}
  POST {base_url}/score     {"prompt": str, "continuation": str, "top_k": int}
      -> {"positions": [{"entries": [[token_id, logprob], ...],
                         "gold_logprob": float, "gold_token_id": int?}]}
  POST {base_url}/embed     {"text": str, "marker": str}
      -> {"vectors": [[float, ...], ...]}

Transport failures and 5xx responses retry with exponential backoff and
jitter (3 attempts); 4xx responses never retry. HTTP 413 maps to
ContextOverflow, and a 501 on /score maps to LogprobsUnsupported. API keys
come from an environment variable named in the config, never from the
config itself.
"""

from __future__ import annotations

import dataclasses
import os
import random
import threading
import time

import httpx

from ..errors import (
    BackendRejected,
    BackendUnavailable,
    ContextOverflow,
    LogprobsUnsupported,
)
from ..textseg import QUESTION_MARKER, MarkedText
from .base import (
    Completion,
    EmbeddingBackend,
    EmbeddingVector,
    GenerationBackend,
    GenerationParams,
    TokenDistribution,
)

_RETRIES = 3
_BACKOFF_BASE_S = 0.25


class _HttpClient:
    def __init__(
        self,
        base_url: str,
        *,
        api_key_env: str | None = None,
        timeout_s: float = 60.0,
        max_inflight: int = 8,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        headers = {}
        if api_key_env:
            key = os.environ.get(api_key_env)
            if not key:
                raise BackendRejected(f"environment variable {api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)
        self._slots = threading.BoundedSemaphore(max_inflight)
        self._sleep = sleep
        self._rng = random.Random(0xC0FFEE)

    def post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        last: Exception | None = None
        for attempt in range(_RETRIES):
            try:
                with self._slots:
                    resp = self._client.post(url, json=payload)
            except httpx.TransportError as exc:
                last = exc
                self._backoff(attempt)
                continue
            if resp.status_code == 501 and path == "/score":
                raise LogprobsUnsupported(f"{url} does not expose distributions")
            if resp.status_code >= 500:
                last = BackendUnavailable(f"{url} returned {resp.status_code}")
                self._backoff(attempt)
                continue
            if resp.status_code == 413:
                raise ContextOverflow(f"{url} rejected the prompt as too long")
            if resp.status_code >= 400:
                raise BackendRejected(f"{url} returned {resp.status_code}: {resp.text[:200]}")
            return resp.json()
        raise BackendUnavailable(f"{url} unreachable after {_RETRIES} attempts: {last}")

    def _backoff(self, attempt: int) -> None:
        if attempt < _RETRIES - 1:
            delay = _BACKOFF_BASE_S * (2 ** attempt) * (1 + self._rng.random())
            self._sleep(delay)

    def get(self, path: str) -> httpx.Response:
        return self._client.get(f"{self.base_url}{path}")

    def close(self) -> None:
        self._client.close()


class RemoteGenerationBackend(GenerationBackend):
    def __init__(
        self,
        base_url: str,
        *,
        backend_id: str = "remote-gen",
        api_key_env: str | None = None,
        timeout_s: float = 60.0,
        max_inflight: int = 8,
        max_context_tokens: int | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.backend_id = backend_id
        self.max_context_tokens = max_context_tokens
        self._http = _HttpClient(
            base_url,
            api_key_env=api_key_env,
            timeout_s=timeout_s,
            max_inflight=max_inflight,
            transport=transport,
            sleep=sleep,
        )

    def generate(self, prompt: str, params: GenerationParams) -> list[Completion]:
        if not prompt:
            raise BackendRejected("empty prompt")
        body = {"prompt": prompt, "params": dataclasses.asdict(params)}
        data = self._http.post("/generate", body)
        completions = [Completion(text=t) for t in data.get("completions", [])]
        if len(completions) != params.num_candidates:
            raise BackendRejected(
                f"asked for {params.num_candidates} completions, got {len(completions)}"
            )
        return completions

    def score_continuation(
        self, prompt: str, continuation: str, top_k: int
    ) -> list[TokenDistribution]:
        body = {"prompt": prompt, "continuation": continuation, "top_k": top_k}
        data = self._http.post("/score", body)
        dists = []
        for t, pos in enumerate(data.get("positions", [])):
            entries = tuple((int(i), float(lp)) for i, lp in pos.get("entries", []))
            gold_id = pos.get("gold_token_id")
            dists.append(
                TokenDistribution(
                    position=t,
                    entries=entries,
                    gold_logprob=float(pos["gold_logprob"]),
                    gold_token_id=int(gold_id) if gold_id is not None else None,
                    is_truncated=len(entries) >= top_k,
                )
            )
        if not dists:
            raise BackendRejected("score response held no positions")
        return dists

    def health(self) -> bool:
        try:
            return self._http.get("/healthz").status_code < 500
        except httpx.HTTPError:
            return False

    def close(self) -> None:
        self._http.close()


class RemoteEmbeddingBackend(EmbeddingBackend):
    def __init__(
        self,
        base_url: str,
        *,
        dim: int,
        backend_id: str = "remote-embed",
        api_key_env: str | None = None,
        timeout_s: float = 60.0,
        max_inflight: int = 8,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.backend_id = backend_id
        self.dim = dim
        self._http = _HttpClient(
            base_url,
            api_key_env=api_key_env,
            timeout_s=timeout_s,
            max_inflight=max_inflight,
            transport=transport,
            sleep=sleep,
        )

    def embed(self, marked: MarkedText) -> list[EmbeddingVector]:
        data = self._http.post("/embed", {"text": marked.text, "marker": marked.marker})
        raw = data.get("vectors", [])
        n_markers = marked.text.count(marked.marker)
        if len(raw) != n_markers:
            raise BackendRejected(f"expected {n_markers} vectors, got {len(raw)}")
        is_question = marked.marker == QUESTION_MARKER
        vectors = []
        for i, values in enumerate(raw):
            tag: int | str = "question" if is_question and n_markers == 1 else i
            vectors.append(
                EmbeddingVector(
                    values=tuple(float(v) for v in values),
                    dim=self.dim,
                    source_marker=tag,
                )
            )
        return vectors

    def health(self) -> bool:
        try:
            return self._http.get("/healthz").status_code < 500
        except httpx.HTTPError:
            return False

    def close(self) -> None:
        self._http.close()
