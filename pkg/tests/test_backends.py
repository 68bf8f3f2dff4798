from __future__ import annotations

import json
import math

import httpx
import pytest

from promptpress.backends import (
    GenerationParams,
    HashEmbeddingBackend,
    MockGenerationBackend,
    RemoteEmbeddingBackend,
    RemoteGenerationBackend,
    TableScorer,
    TokenDistribution,
    UniformScorer,
    stable_token_id,
)
from promptpress.errors import (
    BackendRejected,
    BackendUnavailable,
    ContextOverflow,
    DimensionMismatch,
    InvalidSampling,
    LogprobsUnsupported,
    NonFiniteVector,
)
from promptpress.textseg import RawDocument, mark_question, mark_sentences, segment


class TestGenerationParams:
    def test_greedy_forbids_multiple_candidates(self):
        with pytest.raises(InvalidSampling):
            GenerationParams(temperature=0.0, num_candidates=3)

    def test_sampling_allows_multiple_candidates(self):
        p = GenerationParams(temperature=0.7, num_candidates=3, seed=1)
        assert p.num_candidates == 3

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_new_tokens": 0},
            {"temperature": -0.1},
            {"top_p": 0.0},
            {"top_p": 1.5},
            {"num_candidates": 0},
        ],
    )
    def test_range_validation(self, kwargs):
        with pytest.raises(InvalidSampling):
            GenerationParams(**kwargs)


class TestTokenDistribution:
    def test_entries_sorted_descending(self):
        d = TokenDistribution(
            position=0,
            entries=((0, -2.0), (1, -0.5), (2, -1.0)),
            gold_logprob=-0.5,
            gold_token_id=1,
        )
        assert d.entries == ((1, -0.5), (2, -1.0), (0, -2.0))

    def test_positive_logprob_rejected(self):
        with pytest.raises(ValueError):
            TokenDistribution(position=0, entries=((0, 0.1),), gold_logprob=-1.0)


class TestMockGeneration:
    def test_scripted_lookup(self):
        backend = MockGenerationBackend(script={"P1": "Q1"})
        out = backend.generate("P1", GenerationParams())
        assert [c.text for c in out] == ["Q1"]

    def test_scripted_candidate_list(self):
        backend = MockGenerationBackend(script={"P": ["a", "b", "c"]})
        out = backend.generate("P", GenerationParams(temperature=1.0, num_candidates=3, seed=0))
        assert [c.text for c in out] == ["a", "b", "c"]

    def test_missing_script_rejected(self):
        backend = MockGenerationBackend(script={})
        with pytest.raises(BackendRejected):
            backend.generate("unknown", GenerationParams())

    def test_empty_prompt_rejected(self):
        backend = MockGenerationBackend(seed=0)
        with pytest.raises(BackendRejected):
            backend.generate("", GenerationParams())

    def test_seeded_sampling_stable_and_plural(self):
        params = GenerationParams(temperature=0.9, num_candidates=3, seed=17)
        first = MockGenerationBackend(seed=4).generate("long prompt", params)
        second = MockGenerationBackend(seed=4).generate("long prompt", params)
        assert [c.text for c in first] == [c.text for c in second]
        assert len(first) == 3
        assert len({c.text for c in first}) > 1

    def test_seed_changes_samples(self):
        params_a = GenerationParams(temperature=0.9, num_candidates=2, seed=1)
        params_b = GenerationParams(temperature=0.9, num_candidates=2, seed=2)
        backend = MockGenerationBackend(seed=4)
        assert [c.text for c in backend.generate("p", params_a)] != [
            c.text for c in backend.generate("p", params_b)
        ]

    def test_context_window_overflow(self):
        backend = MockGenerationBackend(seed=0, max_context_tokens=3)
        with pytest.raises(ContextOverflow) as err:
            backend.generate("one two three four five", GenerationParams())
        assert err.value.overflow_tokens == 2

    def test_call_counters(self):
        backend = MockGenerationBackend(seed=0)
        backend.generate("p", GenerationParams())
        backend.score_continuation("p", "x y", top_k=4)
        assert backend.calls == {"generate": 1, "score": 1}


class TestMockScoring:
    def test_uniform_vocabulary(self):
        backend = MockGenerationBackend(seed=0, scorer=UniformScorer(4))
        dists = backend.score_continuation("prompt", "two tokens", top_k=4)
        assert len(dists) == 2
        for d in dists:
            assert len(d.entries) == 4
            assert all(lp == pytest.approx(math.log(0.25)) for _, lp in d.entries)
            assert d.gold_logprob == pytest.approx(math.log(0.25))
            assert not d.is_truncated

    def test_gold_logprob_present_when_outside_top_k(self):
        token = "word"
        vocab = 6
        gold = stable_token_id(token, vocab)
        probs = [0.0] * vocab
        others = [i for i in range(vocab) if i != gold]
        # gold ranks 5th: four ids beat it, one trails it
        for rank, i in enumerate(others):
            probs[i] = [0.30, 0.25, 0.20, 0.15, 0.04][rank]
        probs[gold] = 0.06
        backend = MockGenerationBackend(seed=0, scorer=TableScorer({"p": [probs]}, vocab))
        (dist,) = backend.score_continuation("p", token, top_k=3)
        assert dist.is_truncated
        top_ids = {i for i, _ in dist.entries}
        assert len(top_ids) == 3 and gold not in top_ids
        assert dist.gold_token_id == gold
        assert dist.gold_logprob == pytest.approx(math.log(0.06))

    def test_scoring_deterministic(self):
        backend = MockGenerationBackend(seed=0, scorer=UniformScorer(4))
        a = backend.score_continuation("p", "alpha beta gamma", top_k=4)
        b = backend.score_continuation("p", "alpha beta gamma", top_k=4)
        assert a == b

    def test_renormalized_entries_form_probability_vector(self):
        backend = MockGenerationBackend(seed=0, scorer=UniformScorer(8))
        for d in backend.score_continuation("p", "a b c", top_k=8):
            total = sum(math.exp(lp) for _, lp in d.entries)
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_logprobs_unsupported_raises_but_loglikelihood_works(self):
        backend = MockGenerationBackend(
            seed=0, scorer=UniformScorer(4), supports_logprobs=False
        )
        with pytest.raises(LogprobsUnsupported):
            backend.score_continuation("p", "x", top_k=4)
        assert backend.gold_loglikelihood("p", "x y") == pytest.approx(2 * math.log(0.25))


class TestHashEmbedding:
    def _marked(self, text: str):
        return mark_sentences(segment(RawDocument(id="d", text=text)))

    def test_one_vector_per_marker(self):
        emb = HashEmbeddingBackend(dim=8, seed=0)
        vectors = emb.embed(self._marked("One. Two. Three."))
        assert len(vectors) == 3
        assert all(v.dim == 8 for v in vectors)
        assert [v.source_marker for v in vectors] == [0, 1, 2]

    def test_identical_sentence_same_context_same_vector(self):
        emb = HashEmbeddingBackend(dim=8, seed=0)
        a = emb.embed(self._marked("Alpha beta. Gamma delta."))
        b = emb.embed(self._marked("Alpha beta. Gamma delta."))
        assert a == b

    def test_same_sentence_different_context_differs(self):
        emb = HashEmbeddingBackend(dim=8, seed=0, context_sensitive=True)
        left = emb.embed(self._marked("A cold front arrived. The target phrase."))
        right = emb.embed(self._marked("Rivers rose overnight. The target phrase."))
        assert left[1].values != right[1].values

    def test_context_free_mode_ignores_context(self):
        emb = HashEmbeddingBackend(dim=8, seed=0, context_sensitive=False)
        left = emb.embed(self._marked("A cold front arrived. The target phrase."))
        right = emb.embed(self._marked("Rivers rose overnight. The target phrase."))
        assert left[1].values == right[1].values

    def test_question_marker_tagging(self):
        emb = HashEmbeddingBackend(dim=8, seed=0)
        (v,) = emb.embed(mark_question("Why is the sky dark at night?"))
        assert v.source_marker == "question"

    def test_pinned_vector_wins(self):
        pin = tuple(float(i) for i in range(8))
        emb = HashEmbeddingBackend(dim=8, seed=0, pinned={"Two.": pin})
        vectors = emb.embed(self._marked("One. Two."))
        assert vectors[1].values == pin
        assert vectors[0].values != pin

    def test_no_marker_rejected(self):
        emb = HashEmbeddingBackend(dim=8, seed=0)
        from promptpress.textseg import MarkedText

        with pytest.raises(BackendRejected):
            emb.embed(MarkedText(text="no markers here", marker="<end_of_sent>"))

    def test_nan_vector_rejected_at_construction(self):
        from promptpress.backends import EmbeddingVector

        with pytest.raises(NonFiniteVector):
            EmbeddingVector(values=(1.0, float("nan")), dim=2)
        with pytest.raises(DimensionMismatch):
            EmbeddingVector(values=(1.0, 2.0), dim=3)


def _transport(handler):
    return httpx.MockTransport(handler)


class TestRemoteGeneration:
    def test_generate_round_trip(self):
        def handler(request: httpx.Request) -> httpx.Response:
            assert request.url.path == "/generate"
            body = json.loads(request.content)
            assert body["prompt"] == "hello"
            assert body["params"]["num_candidates"] == 2
            return httpx.Response(200, json={"completions": ["x", "y"]})

        backend = RemoteGenerationBackend("http://model", transport=_transport(handler))
        out = backend.generate("hello", GenerationParams(temperature=0.5, num_candidates=2))
        assert [c.text for c in out] == ["x", "y"]

    def test_retries_transport_errors_then_succeeds(self):
        attempts = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            attempts["n"] += 1
            if attempts["n"] < 3:
                raise httpx.ConnectError("refused", request=request)
            return httpx.Response(200, json={"completions": ["ok"]})

        backend = RemoteGenerationBackend(
            "http://model", transport=_transport(handler), sleep=lambda s: None
        )
        assert backend.generate("p", GenerationParams())[0].text == "ok"
        assert attempts["n"] == 3

    def test_500_retries_then_unavailable(self):
        attempts = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            attempts["n"] += 1
            return httpx.Response(503, text="down")

        backend = RemoteGenerationBackend(
            "http://model", transport=_transport(handler), sleep=lambda s: None
        )
        with pytest.raises(BackendUnavailable):
            backend.generate("p", GenerationParams())
        assert attempts["n"] == 3

    def test_400_never_retries(self):
        attempts = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            attempts["n"] += 1
            return httpx.Response(400, text="bad request")

        backend = RemoteGenerationBackend(
            "http://model", transport=_transport(handler), sleep=lambda s: None
        )
        with pytest.raises(BackendRejected):
            backend.generate("p", GenerationParams())
        assert attempts["n"] == 1

    def test_413_maps_to_context_overflow(self):
        backend = RemoteGenerationBackend(
            "http://model",
            transport=_transport(lambda r: httpx.Response(413)),
            sleep=lambda s: None,
        )
        with pytest.raises(ContextOverflow):
            backend.generate("p", GenerationParams())

    def test_score_schema_parsed(self):
        def handler(request: httpx.Request) -> httpx.Response:
            assert request.url.path == "/score"
            body = json.loads(request.content)
            assert body == {"prompt": "p", "continuation": "r", "top_k": 2}
            return httpx.Response(
                200,
                json={
                    "positions": [
                        {"entries": [[7, -0.1], [3, -2.3]], "gold_logprob": -2.3,
                         "gold_token_id": 3},
                    ]
                },
            )

        backend = RemoteGenerationBackend("http://model", transport=_transport(handler))
        (dist,) = backend.score_continuation("p", "r", top_k=2)
        assert dist.entries == ((7, -0.1), (3, -2.3))
        assert dist.gold_token_id == 3
        assert dist.gold_logprob == -2.3

    def test_score_501_maps_to_logprobs_unsupported(self):
        backend = RemoteGenerationBackend(
            "http://model",
            transport=_transport(lambda r: httpx.Response(501)),
            sleep=lambda s: None,
        )
        with pytest.raises(LogprobsUnsupported):
            backend.score_continuation("p", "r", top_k=2)

    def test_api_key_header_from_env(self, monkeypatch):
        monkeypatch.setenv("MODEL_KEY", "sk-test")
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"completions": ["ok"]})

        backend = RemoteGenerationBackend(
            "http://model", api_key_env="MODEL_KEY", transport=_transport(handler)
        )
        backend.generate("p", GenerationParams())
        assert seen["auth"] == "Bearer sk-test"

    def test_missing_api_key_env_rejected(self, monkeypatch):
        monkeypatch.delenv("NOPE_KEY", raising=False)
        with pytest.raises(BackendRejected):
            RemoteGenerationBackend("http://model", api_key_env="NOPE_KEY")


class TestRemoteEmbedding:
    def test_embed_round_trip(self):
        def handler(request: httpx.Request) -> httpx.Response:
            assert request.url.path == "/embed"
            return httpx.Response(200, json={"vectors": [[1.0, 0.0], [0.0, 1.0]]})

        backend = RemoteEmbeddingBackend("http://emb", dim=2, transport=_transport(handler))
        marked = mark_sentences(segment(RawDocument(id="d", text="One. Two.")))
        vectors = backend.embed(marked)
        assert [v.values for v in vectors] == [(1.0, 0.0), (0.0, 1.0)]

    def test_vector_count_mismatch_rejected(self):
        backend = RemoteEmbeddingBackend(
            "http://emb",
            dim=2,
            transport=_transport(lambda r: httpx.Response(200, json={"vectors": [[1.0, 0.0]]})),
        )
        marked = mark_sentences(segment(RawDocument(id="d", text="One. Two.")))
        with pytest.raises(BackendRejected):
            backend.embed(marked)

    def test_inconsistent_width_rejected(self):
        backend = RemoteEmbeddingBackend(
            "http://emb",
            dim=2,
            transport=_transport(
                lambda r: httpx.Response(200, json={"vectors": [[1.0, 0.0], [1.0]]})
            ),
        )
        marked = mark_sentences(segment(RawDocument(id="d", text="One. Two.")))
        with pytest.raises(DimensionMismatch):
            backend.embed(marked)
