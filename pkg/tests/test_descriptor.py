from __future__ import annotations

import math

import numpy as np
import pytest

from promptpress.backends import (
    AutoregressiveScorer,
    GenerationParams,
    MockGenerationBackend,
    TableScorer,
    UniformScorer,
    stable_token_id,
)
from promptpress.descriptor import (
    TaskDescription,
    build_descriptor_prompt,
    describe,
    describe_candidates,
    nll,
)
from promptpress.errors import ContextOverflow, DescriptionEmpty, InvalidSampling
from promptpress.templates import get_template, render
from promptpress.textseg import RawDocument


class TestTaskDescription:
    def test_user_supplied_carries_no_gen_params(self):
        with pytest.raises(ValueError):
            TaskDescription(text="q", origin="user_supplied", gen_params=GenerationParams())

    def test_empty_text_rejected(self):
        with pytest.raises(DescriptionEmpty):
            TaskDescription(text="  ", origin="generated")


class TestTemplates:
    def test_descriptor_prompt_embeds_document_verbatim(self):
        prompt = build_descriptor_prompt("DOC BODY HERE")
        assert "DOC BODY HERE" in prompt
        assert prompt.endswith("Query:")
        assert "{text}" not in prompt

    def test_template_writer_keeps_literal_placeholders(self):
        filled = render("template_writer_v1", input_text="T", input_question="Q")
        assert "{text}" in filled and "{question}" in filled
        assert "{input_text}" not in filled and "{input_question}" not in filled

    def test_unknown_template_and_slots(self):
        with pytest.raises(KeyError):
            get_template("missing")
        with pytest.raises(ValueError):
            render("query_writer_v1", wrong_slot="x")


class TestDescribe:
    def test_scripted_description(self):
        doc = RawDocument(id="d", text="Meeting notes body.")
        prompt = build_descriptor_prompt(doc.text)
        backend = MockGenerationBackend(script={prompt: "Summarize the meeting notes."})
        td = describe(doc, backend)
        assert td.text == "Summarize the meeting notes."
        assert td.origin == "generated"
        assert td.candidate_rank is None

    def test_whitespace_reply_raises(self):
        doc = RawDocument(id="d", text="Body.")
        backend = MockGenerationBackend(script={build_descriptor_prompt(doc.text): "   "})
        with pytest.raises(DescriptionEmpty):
            describe(doc, backend)

    def test_window_overflow_surfaced_with_amount(self):
        doc = RawDocument(id="d", text="many words " * 50)
        backend = MockGenerationBackend(seed=0, max_context_tokens=40)
        with pytest.raises(ContextOverflow) as err:
            describe(doc, backend)
        assert err.value.overflow_tokens > 0


class TestDescribeCandidates:
    def test_n_one_matches_describe(self):
        doc = RawDocument(id="d", text="Body text.")
        backend = MockGenerationBackend(seed=7)
        single = describe(doc, backend)
        (candidate,) = describe_candidates(doc, backend, 1, GenerationParams())
        assert candidate.text == single.text
        assert candidate.candidate_rank == 0

    def test_seeded_candidates_stable_across_runs(self):
        doc = RawDocument(id="d", text="Long body about reservoirs and valves.")
        params = GenerationParams(temperature=0.8, seed=3)
        first = describe_candidates(doc, MockGenerationBackend(seed=7), 4, params)
        second = describe_candidates(doc, MockGenerationBackend(seed=7), 4, params)
        assert [c.text for c in first] == [c.text for c in second]
        assert [c.candidate_rank for c in first] == [0, 1, 2, 3]

    def test_greedy_multi_candidate_rejected(self):
        doc = RawDocument(id="d", text="Body.")
        with pytest.raises(InvalidSampling):
            describe_candidates(doc, MockGenerationBackend(seed=0), 4, GenerationParams())

    def test_duplicates_are_kept(self):
        doc = RawDocument(id="d", text="Body.")
        prompt = build_descriptor_prompt(doc.text)
        backend = MockGenerationBackend(script={prompt: ["same", "same", "other"]})
        out = describe_candidates(
            doc, backend, 3, GenerationParams(temperature=0.5, seed=0)
        )
        assert [c.text for c in out] == ["same", "same", "other"]


class TestNll:
    def test_uniform_closed_form(self):
        backend = MockGenerationBackend(seed=0, scorer=UniformScorer(4))
        result = nll(backend, "prompt", "three token target".replace("token", "tok"))
        assert result.token_count == 3
        assert result.total == pytest.approx(3 * math.log(4), abs=1e-9)
        assert result.per_token_mean == pytest.approx(math.log(4), abs=1e-9)

    def test_certain_tokens_cost_nothing(self):
        vocab = 4
        token = "sure"
        gold = stable_token_id(token, vocab)
        row = [0.0] * vocab
        row[gold] = 1.0
        backend = MockGenerationBackend(seed=0, scorer=TableScorer({"p": [row]}, vocab))
        assert nll(backend, "p", token).total == 0.0

    def test_nll_non_negative_on_random_targets(self):
        rng = np.random.default_rng(4)
        backend = MockGenerationBackend(seed=0, scorer=AutoregressiveScorer(8, seed=2))
        words = ["ash", "birch", "cedar", "dune", "elm"]
        for _ in range(50):
            target = " ".join(words[int(rng.integers(0, 5))] for _ in range(int(rng.integers(1, 8))))
            assert nll(backend, "base prompt:", target).total >= 0.0

    def test_chain_rule_additivity(self):
        rng = np.random.default_rng(5)
        backend = MockGenerationBackend(seed=0, scorer=AutoregressiveScorer(8, seed=2))
        words = ["ash", "birch", "cedar", "dune", "elm", "fir"]
        for _ in range(100):
            n = int(rng.integers(2, 10))
            tokens = [words[int(rng.integers(0, 6))] for _ in range(n)]
            whole = " ".join(tokens)
            cut = int(rng.integers(1, n))
            prefix = " ".join(tokens[:cut])
            suffix = " " + " ".join(tokens[cut:])
            prompt = "scoring prompt: "
            total_whole = nll(backend, prompt, whole).total
            total_split = (
                nll(backend, prompt, prefix).total
                + nll(backend, prompt + prefix, suffix).total
            )
            assert total_split == pytest.approx(total_whole, abs=1e-9)
