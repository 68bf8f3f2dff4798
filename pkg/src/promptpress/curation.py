"""Synthetic dataset factories with strict parsing and validation.

Two pipelines. The pair pipeline prompts a model to write a query for each
document, then asks it for an instruction template (which must carry literal
{text} and {question} placeholders) and substitutes both, yielding
structured (prompt, question) training pairs. The multi-hop pipeline numbers
a document's sentences, asks for a question that needs several of them, and
parses out the final question plus the cited sentence numbers.

Rejects are data, not logs: every input either becomes a record or a reject
row with a reason, and emitted + rejected == attempted exactly.
"""

from __future__ import annotations

import json
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import GenerationBackend, GenerationParams
from .errors import BackendError, EngineError, ParseFailure
from .templates import render
from .textseg import FALLBACK_TOKENIZER_ID, RawDocument, SegmentedContext, Tokenizer, segment

STAGE_RAW = "raw"
STAGE_STRUCTURED = "structured"
STAGE_MULTIHOP = "multihop"

REASON_EMPTY_QUERY = "EmptyQuery"
REASON_FORBIDDEN_TERM = "ForbiddenTerm"
REASON_MISSING_PLACEHOLDER = "MissingPlaceholder"
REASON_PLACEHOLDER_RESIDUE = "PlaceholderResidue"
REASON_TOO_FEW_SENTENCES = "TooFewSentences"
REASON_PARSE_FAILURE = "ParseFailure"
REASON_INDEX_OUT_OF_RANGE = "IndexOutOfRange"
REASON_NOT_MULTI_HOP = "NotMultiHop"

_FORBIDDEN_WORD = re.compile(r"\bcontext\b", re.IGNORECASE)
_NUMBER_TAG = re.compile(r"\[\[(\d+)\]\]")
_FINAL_QUESTION = re.compile(r"^\s*Final question\s*:\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)
_NECESSARY_LINE = re.compile(r"^\s*Necessary sentences?\s*:\s*(.*?)\s*$", re.IGNORECASE | re.MULTILINE)


@dataclass(frozen=True)
class DescriptorPair:
    """A (prompt, question) training pair for the task descriptor."""

    id: str
    prompt: str
    question: str
    stage: str
    source_doc_id: str

    def __post_init__(self):
        if self.stage not in (STAGE_RAW, STAGE_STRUCTURED):
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.stage == STAGE_STRUCTURED:
            if "{text}" in self.prompt or "{question}" in self.prompt:
                raise ValueError("structured prompt still carries template placeholders")

    def as_row(self) -> dict:
        return {
            "id": self.id,
            "stage": self.stage,
            "prompt": self.prompt,
            "question": self.question,
            "source_doc_id": self.source_doc_id,
        }


@dataclass(frozen=True)
class MultiHopTuple:
    """A question needing several sentences, with positive/negative ordinals.

    Ordinals are 1-based, matching the [[i]] numbering shown to the model.
    """

    id: str
    question: str
    context: SegmentedContext
    positive_indices: frozenset[int]
    negative_indices: frozenset[int]
    rationale: str | None = None

    def __post_init__(self):
        n = len(self.context.sentences)
        valid = range(1, n + 1)
        if len(self.positive_indices) < 2:
            raise ValueError("multi-hop tuples need at least 2 positive sentences")
        if not all(i in valid for i in self.positive_indices):
            raise ValueError("positive ordinal out of range")
        if not all(i in valid for i in self.negative_indices):
            raise ValueError("negative ordinal out of range")
        if self.positive_indices & self.negative_indices:
            raise ValueError("positives and negatives overlap")

    def as_row(self, positive_export: str = "set") -> dict:
        if positive_export == "head":
            positives = [min(self.positive_indices)]
        elif positive_export == "set":
            positives = sorted(self.positive_indices)
        else:
            raise ValueError(f"unknown positive_export {positive_export!r}")
        return {
            "id": self.id,
            "question": self.question,
            "context_sentences": [s.text for s in self.context.sentences],
            "positive_indices": positives,
            "negative_indices": sorted(self.negative_indices),
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class RejectRecord:
    id: str
    stage: str
    reason: str
    raw_response: str

    def as_row(self) -> dict:
        return {
            "id": self.id,
            "stage": self.stage,
            "reason": self.reason,
            "raw_response": self.raw_response,
        }


@dataclass
class CurationResult:
    """Accepted records plus the reject rows for everything else."""

    records: list = field(default_factory=list)
    rejects: list[RejectRecord] = field(default_factory=list)

    @property
    def attempted(self) -> int:
        return len(self.records) + len(self.rejects)


def load_corpus(path: str | Path) -> list[RawDocument]:
    """Read a corpus from a directory of .txt files or a JSON-Lines file.

    Directory entries are ordered by filename; JSONL rows keep file order
    and need {id, text} fields (source optional).
    """
    path = Path(path)
    docs: list[RawDocument] = []
    if path.is_dir():
        for file in sorted(path.glob("*.txt")):
            docs.append(RawDocument(id=file.stem, text=file.read_text(encoding="utf-8")))
    else:
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                docs.append(
                    RawDocument(id=str(row["id"]), text=row["text"], source=row.get("source"))
                )
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise ValueError(f"duplicate document id {doc.id!r} in corpus")
        seen.add(doc.id)
    return docs


def number_sentences(ctx: SegmentedContext) -> str:
    """Prefix each sentence with its 1-based [[i]] tag, joined by spaces."""
    if not ctx.sentences:
        raise ValueError("cannot number an empty context")
    return " ".join(f"[[{i + 1}]] {s.text}" for i, s in enumerate(ctx.sentences))


def strip_numbering(numbered: str) -> list[str]:
    """Inverse of number_sentences: recover the sentence texts."""
    pieces = _NUMBER_TAG.split(numbered)
    # split yields [prefix, num, text, num, text, ...]; texts sit at odd gaps
    return [pieces[i].strip() for i in range(2, len(pieces), 2) if pieces[i].strip()]


def _map_documents(docs, worker, max_workers: int):
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(worker, docs))
    return [worker(d) for d in docs]


def _collect(result: CurationResult, outcomes) -> CurationResult:
    for outcome in outcomes:
        if isinstance(outcome, RejectRecord):
            result.rejects.append(outcome)
        elif isinstance(outcome, list):
            for item in outcome:
                _collect(result, [item])
        else:
            result.records.append(outcome)
    return result


def curate_ctd_raw(
    corpus: list[RawDocument],
    backend: GenerationBackend,
    params: GenerationParams | None = None,
    *,
    max_workers: int = 1,
) -> CurationResult:
    """Stage one: ask the backend to write a query for each document."""
    params = params or GenerationParams()

    def worker(doc: RawDocument):
        pair_id = f"{doc.id}/{STAGE_RAW}"
        try:
            reply = backend.generate(render("query_writer_v1", text=doc.text), params)[0].text
        except BackendError as exc:
            return RejectRecord(pair_id, STAGE_RAW, f"BackendError:{type(exc).__name__}", str(exc))
        question = reply.strip()
        if not question:
            return RejectRecord(pair_id, STAGE_RAW, REASON_EMPTY_QUERY, reply)
        if _FORBIDDEN_WORD.search(question):
            return RejectRecord(pair_id, STAGE_RAW, REASON_FORBIDDEN_TERM, reply)
        return DescriptorPair(
            id=pair_id, prompt=doc.text, question=question, stage=STAGE_RAW, source_doc_id=doc.id
        )

    return _collect(CurationResult(), _map_documents(corpus, worker, max_workers))


def structure_ctd(
    pairs: list[DescriptorPair],
    backend: GenerationBackend,
    params: GenerationParams | None = None,
    *,
    shared_template: bool = False,
    max_workers: int = 1,
) -> CurationResult:
    """Stage two: wrap each raw pair in a model-written instruction template.

    The backend's reply must contain the literal {text} and {question}
    placeholders; both are substituted, and the source text must survive
    byte-for-byte. By default a fresh template is requested per pair;
    shared_template=True reuses the first accepted one.
    """
    params = params or GenerationParams()
    if any(p.stage != STAGE_RAW for p in pairs):
        raise ValueError("structure_ctd expects stage=raw pairs")
    shared: dict[str, str] = {}

    def fetch_template(pair: DescriptorPair) -> str:
        if shared_template and "template" in shared:
            return shared["template"]
        reply = backend.generate(
            render("template_writer_v1", input_text=pair.prompt, input_question=pair.question),
            params,
        )[0].text
        if shared_template and "{text}" in reply and "{question}" in reply:
            shared.setdefault("template", reply)
        return reply

    def worker(pair: DescriptorPair):
        pair_id = f"{pair.source_doc_id}/{STAGE_STRUCTURED}"
        try:
            template = fetch_template(pair)
        except BackendError as exc:
            return RejectRecord(
                pair_id, STAGE_STRUCTURED, f"BackendError:{type(exc).__name__}", str(exc)
            )
        if "{text}" not in template or "{question}" not in template:
            return RejectRecord(pair_id, STAGE_STRUCTURED, REASON_MISSING_PLACEHOLDER, template)
        structured = template.replace("{question}", pair.question).replace("{text}", pair.prompt)
        if "{text}" in structured or "{question}" in structured:
            return RejectRecord(pair_id, STAGE_STRUCTURED, REASON_PLACEHOLDER_RESIDUE, template)
        return DescriptorPair(
            id=pair_id,
            prompt=structured,
            question=pair.question,
            stage=STAGE_STRUCTURED,
            source_doc_id=pair.source_doc_id,
        )

    workers = 1 if shared_template else max_workers
    return _collect(CurationResult(), _map_documents(pairs, worker, workers))


@dataclass(frozen=True)
class ParsedMultiHop:
    """Fields extracted from a multi-hop generation reply."""

    question: str
    necessary: frozenset[int]
    out_of_range: frozenset[int]
    rationale: str | None


def parse_multihop(response_text: str, n_sentences: int) -> ParsedMultiHop:
    """Pull the final question and cited sentence numbers out of a reply.

    Tolerates surrounding hop question/answer text; duplicate citations
    collapse to a set; cited numbers beyond n_sentences are reported in
    out_of_range for the caller to reject. Raises ParseFailure when the
    final-question or necessary-sentences line is missing.
    """
    question_matches = list(_FINAL_QUESTION.finditer(response_text))
    if not question_matches:
        raise ParseFailure("no 'Final question:' line", response_text)
    question = question_matches[-1].group(1)
    necessary_matches = list(_NECESSARY_LINE.finditer(response_text))
    if not necessary_matches:
        raise ParseFailure("no 'Necessary sentences:' line", response_text)
    cited = frozenset(int(m) for m in _NUMBER_TAG.findall(necessary_matches[-1].group(1)))
    if not cited:
        raise ParseFailure("necessary-sentences line cites nothing", response_text)
    rationale = response_text[: question_matches[-1].start()].strip() or None
    return ParsedMultiHop(
        question=question,
        necessary=cited,
        out_of_range=frozenset(i for i in cited if not 1 <= i <= n_sentences),
        rationale=rationale,
    )


def curate_mcqr(
    corpus: list[RawDocument],
    backend: GenerationBackend,
    params: GenerationParams | None = None,
    *,
    seed: int = 0,
    negatives_per_tuple: int = 8,
    fan_out: int = 1,
    min_sentences: int = 4,
    tokenizer: Tokenizer | str = FALLBACK_TOKENIZER_ID,
    max_workers: int = 1,
) -> CurationResult:
    """Generate multi-hop (question, context, positives, negatives) tuples.

    Negatives are all non-necessary sentence ordinals, subsampled to
    negatives_per_tuple with a deterministic per-document seed. fan_out asks
    for several questions per document under distinct seeds.
    """
    params = params or GenerationParams()

    def one(doc: RawDocument, ctx: SegmentedContext, j: int):
        tuple_id = f"{doc.id}/mh{j}"
        item_params = params
        if fan_out > 1 and params.temperature > 0:
            base = params.seed if params.seed is not None else seed
            item_params = GenerationParams(
                max_new_tokens=params.max_new_tokens,
                temperature=params.temperature,
                top_p=params.top_p,
                num_candidates=1,
                seed=base + j,
                stop_sequences=params.stop_sequences,
            )
        try:
            reply = backend.generate(
                render("multihop_writer_v1", text=number_sentences(ctx)), item_params
            )[0].text
        except BackendError as exc:
            return RejectRecord(
                tuple_id, STAGE_MULTIHOP, f"BackendError:{type(exc).__name__}", str(exc)
            )
        try:
            parsed = parse_multihop(reply, len(ctx.sentences))
        except ParseFailure as exc:
            return RejectRecord(tuple_id, STAGE_MULTIHOP, REASON_PARSE_FAILURE, exc.raw_text)
        if parsed.out_of_range:
            return RejectRecord(tuple_id, STAGE_MULTIHOP, REASON_INDEX_OUT_OF_RANGE, reply)
        if len(parsed.necessary) < 2:
            return RejectRecord(tuple_id, STAGE_MULTIHOP, REASON_NOT_MULTI_HOP, reply)
        pool = sorted(set(range(1, len(ctx.sentences) + 1)) - parsed.necessary)
        rng = random.Random(f"{seed}:{doc.id}:{j}")
        if len(pool) > negatives_per_tuple:
            pool = sorted(rng.sample(pool, negatives_per_tuple))
        return MultiHopTuple(
            id=tuple_id,
            question=parsed.question,
            context=ctx,
            positive_indices=parsed.necessary,
            negative_indices=frozenset(pool),
            rationale=parsed.rationale,
        )

    def worker(doc: RawDocument):
        try:
            ctx = segment(doc, tokenizer)
        except EngineError as exc:
            return [RejectRecord(f"{doc.id}/mh0", STAGE_MULTIHOP, type(exc).__name__, str(exc))]
        if len(ctx.sentences) < min_sentences:
            return [
                RejectRecord(
                    f"{doc.id}/mh0",
                    STAGE_MULTIHOP,
                    REASON_TOO_FEW_SENTENCES,
                    f"{len(ctx.sentences)} sentences",
                )
            ]
        return [one(doc, ctx, j) for j in range(fan_out)]

    return _collect(CurationResult(), _map_documents(corpus, worker, max_workers))
