"""Reference text metrics: LCS-based Rouge-L, bag-of-token F1, edit similarity.

All three return scores in [0, 1] and equal 1.0 on identical inputs. The F1
normalizer lowercases and strips punctuation; an optional article list can
be removed as well (off by default so that single-letter tokens count).
"""

from __future__ import annotations

import re
from collections import Counter

_PUNCT = re.compile(r"[^\w\s]")


def normalize_tokens(text: str, articles: tuple[str, ...] = ()) -> list[str]:
    cleaned = _PUNCT.sub(" ", text.lower())
    return [t for t in cleaned.split() if t not in articles]


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def _f_measure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rouge_l(candidate: str, reference: str) -> float:
    """LCS F-measure over whitespace tokens."""
    cand = candidate.split()
    ref = reference.split()
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    return _f_measure(lcs / len(cand), lcs / len(ref))


def token_f1(candidate: str, reference: str, articles: tuple[str, ...] = ()) -> float:
    """F1 over the multiset intersection of normalized tokens."""
    cand = normalize_tokens(candidate, articles)
    ref = normalize_tokens(reference, articles)
    if not cand or not ref:
        return 0.0
    overlap = sum((Counter(cand) & Counter(ref)).values())
    return _f_measure(overlap / len(cand), overlap / len(ref))


def levenshtein(a: str, b: str) -> int:
    """Character edit distance (insert / delete / substitute, unit costs)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[len(b)]


def edit_similarity(candidate: str, reference: str) -> float:
    """1 - dist/max(len); two empty strings are perfectly similar."""
    longest = max(len(candidate), len(reference))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(candidate, reference) / longest
