"""Deterministic sentence segmentation, marker insertion, and token counting.

The segmenter is rule-based and versioned: terminal punctuation followed by
whitespace (or end of text) closes a sentence, a fixed abbreviation list
suppresses false boundaries, blank lines are hard breaks, and over-long
sentences are split at clause punctuation. Identical input always yields
identical spans, and the spans reconstruct the source text exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyDocument, EmptyQuestion, MarkerCollision, UnknownTokenizer

SEGMENTER_RULE_VERSION = "seg-rules/1"

SENTENCE_MARKER = "<end_of_sent>"
QUESTION_MARKER = "<end_of_question>"

DEFAULT_MAX_SENTENCE_CHARS = 2048

_TERMINALS = ".!?…"
_CLAUSE_PUNCT = ",;"
_BLANK_LINE = re.compile(r"\n[ \t\r]*\n+")

# Words whose trailing period does not end a sentence. Lowercased, period
# included. Versioned together with SEGMENTER_RULE_VERSION.
_ABBREVIATIONS = frozenset({
    "dr.", "mr.", "mrs.", "ms.", "prof.", "rev.", "gen.", "sen.", "rep.",
    "st.", "jr.", "sr.", "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.",
    "fig.", "figs.", "eq.", "sec.", "no.", "vol.", "pp.", "p.", "ch.",
    "approx.", "dept.", "univ.", "inc.", "ltd.", "co.", "corp.", "est.",
    "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.",
    "sept.", "oct.", "nov.", "dec.", "mt.", "ft.", "hr.", "min.",
})


class Tokenizer:
    """Registry-addressable tokenizer: a name plus an encode function."""

    def __init__(self, tokenizer_id: str, encode_fn):
        self.tokenizer_id = tokenizer_id
        self._encode_fn = encode_fn

    def encode(self, text: str) -> list[str]:
        return self._encode_fn(text)

    def count(self, text: str) -> int:
        return len(self._encode_fn(text))


_WS_PUNCT_TOKEN = re.compile(r"\w+|[^\w\s]")


def _ws_punct_encode(text: str) -> list[str]:
    return _WS_PUNCT_TOKEN.findall(text)


FALLBACK_TOKENIZER_ID = "ws-punct-v1"

_REGISTRY: dict[str, Tokenizer] = {}


def register_tokenizer(tokenizer: Tokenizer) -> None:
    _REGISTRY[tokenizer.tokenizer_id] = tokenizer


def get_tokenizer(tokenizer_id: str) -> Tokenizer:
    try:
        return _REGISTRY[tokenizer_id]
    except KeyError:
        raise UnknownTokenizer(f"no tokenizer registered under {tokenizer_id!r}") from None


register_tokenizer(Tokenizer(FALLBACK_TOKENIZER_ID, _ws_punct_encode))


def _resolve(tokenizer: Tokenizer | str) -> Tokenizer:
    if isinstance(tokenizer, str):
        return get_tokenizer(tokenizer)
    return tokenizer


def count_tokens(text: str, tokenizer: Tokenizer | str = FALLBACK_TOKENIZER_ID) -> int:
    """Deterministic token count for (text, tokenizer_id); empty text counts 0."""
    return _resolve(tokenizer).count(text)


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    source: str | None = None


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    char_span: tuple[int, int]
    token_count: int


@dataclass(frozen=True)
class SegmentedContext:
    document: RawDocument
    sentences: tuple[Sentence, ...]
    tokenizer_id: str

    @property
    def total_tokens(self) -> int:
        # Inter-sentence gaps are whitespace by construction and count zero
        # under the shipped tokenizer, so the document total is the sum.
        return sum(s.token_count for s in self.sentences)

    def gap_before(self, index: int) -> str:
        """Source text between sentence index-1 and sentence index."""
        start = 0 if index == 0 else self.sentences[index - 1].char_span[1]
        return self.document.text[start:self.sentences[index].char_span[0]]


@dataclass(frozen=True)
class MarkedText:
    """Text with boundary markers inserted, plus where each marker starts."""

    text: str
    marker: str
    marker_offsets: tuple[int, ...] = field(default=())

    @property
    def marker_count(self) -> int:
        return len(self.marker_offsets)


def _is_abbreviation(text: str, period_pos: int, start: int) -> bool:
    k = period_pos
    while k > start and not text[k - 1].isspace():
        k -= 1
    word = text[k:period_pos + 1].lower().lstrip("([{'\"“‘")
    return word in _ABBREVIATIONS


def _trim_span(text: str, a: int, b: int) -> tuple[int, int]:
    while a < b and text[a].isspace():
        a += 1
    while b > a and text[b - 1].isspace():
        b -= 1
    return a, b


def _block_sentence_spans(text: str, start: int, end: int) -> list[tuple[int, int]]:
    spans: list[tuple[int, int]] = []
    cursor = start
    i = start
    while i < end:
        ch = text[i]
        if ch in _TERMINALS:
            j = i
            while j + 1 < end and text[j + 1] in _TERMINALS:
                j += 1
            at_boundary = j + 1 >= end or text[j + 1].isspace()
            single_period = j == i and ch == "."
            if at_boundary and single_period and _is_abbreviation(text, i, cursor):
                at_boundary = False
            if at_boundary:
                spans.append((cursor, j + 1))
                cursor = j + 1
                while cursor < end and text[cursor].isspace():
                    cursor += 1
                i = cursor
                continue
            i = j + 1
            continue
        i += 1
    if cursor < end:
        spans.append((cursor, end))
    return [(a, b) for a, b in (_trim_span(text, a, b) for a, b in spans) if a < b]


def _split_long_span(text: str, a: int, b: int, max_chars: int) -> list[tuple[int, int]]:
    pieces: list[tuple[int, int]] = []
    start = a
    while b - start > max_chars:
        window_end = start + max_chars
        cut = -1
        for p in range(window_end - 1, start, -1):
            if text[p] in _CLAUSE_PUNCT:
                cut = p + 1
                break
        if cut <= start:
            cut = window_end
        pieces.append((start, cut))
        start = cut
        while start < b and text[start].isspace():
            start += 1
    if start < b:
        pieces.append((start, b))
    return [(x, y) for x, y in (_trim_span(text, x, y) for x, y in pieces) if x < y]


def segment(
    document: RawDocument,
    tokenizer: Tokenizer | str = FALLBACK_TOKENIZER_ID,
    max_sentence_chars: int = DEFAULT_MAX_SENTENCE_CHARS,
) -> SegmentedContext:
    """Split a document into ordered sentences with exact character spans.

    Pure function of (text, rule version): terminal punctuation followed by
    whitespace or end closes a sentence, abbreviations from a fixed list do
    not, blank lines always break, and sentences longer than
    max_sentence_chars are split at the nearest clause boundary (hard split
    when none exists). Raises EmptyDocument for whitespace-only input.
    """
    text = document.text
    if not text.strip():
        raise EmptyDocument(f"document {document.id!r} has no content")
    tok = _resolve(tokenizer)

    spans: list[tuple[int, int]] = []
    block_start = 0
    for m in _BLANK_LINE.finditer(text):
        if m.start() > block_start:
            spans.extend(_block_sentence_spans(text, block_start, m.start()))
        block_start = m.end()
    if block_start < len(text):
        spans.extend(_block_sentence_spans(text, block_start, len(text)))

    final_spans: list[tuple[int, int]] = []
    for a, b in spans:
        if b - a > max_sentence_chars:
            final_spans.extend(_split_long_span(text, a, b, max_sentence_chars))
        else:
            final_spans.append((a, b))

    sentences = tuple(
        Sentence(index=i, text=text[a:b], char_span=(a, b), token_count=tok.count(text[a:b]))
        for i, (a, b) in enumerate(final_spans)
    )
    return SegmentedContext(document=document, sentences=sentences, tokenizer_id=tok.tokenizer_id)


def mark_sentences(ctx: SegmentedContext, marker: str = SENTENCE_MARKER) -> MarkedText:
    """Insert one marker immediately after each sentence, preserving gaps.

    Stripping every marker from the result recovers the original document
    text exactly. Raises MarkerCollision if the document already contains
    the literal marker (escaping would change embedding inputs invisibly).
    """
    if not ctx.sentences:
        raise EmptyDocument("cannot mark a context with no sentences")
    text = ctx.document.text
    if marker in text:
        raise MarkerCollision(f"document {ctx.document.id!r} contains {marker!r}")
    parts: list[str] = []
    offsets: list[int] = []
    pos = 0
    out_len = 0
    for sent in ctx.sentences:
        a, b = sent.char_span
        chunk = text[pos:b]
        parts.append(chunk)
        out_len += len(chunk)
        offsets.append(out_len)
        parts.append(marker)
        out_len += len(marker)
        pos = b
    if pos < len(text):
        parts.append(text[pos:])
    return MarkedText(text="".join(parts), marker=marker, marker_offsets=tuple(offsets))


def mark_question(question: str, marker: str = QUESTION_MARKER) -> MarkedText:
    """Append a single end-of-question marker to the question text."""
    if not question.strip():
        raise EmptyQuestion("question is empty")
    if marker in question:
        raise MarkerCollision(f"question contains {marker!r}")
    return MarkedText(text=question + marker, marker=marker, marker_offsets=(len(question),))


def strip_markers(marked: MarkedText) -> str:
    """Left inverse of marking: remove every occurrence of the marker."""
    return marked.text.replace(marked.marker, "")
