"""Canonical tokenizer and n-gram statistics.

Tokenization rule: lowercase, split on whitespace, strip leading and
trailing punctuation (any Unicode ``P*`` category) from each token, drop
tokens that end up empty.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from ..errors import EmptyCorpus

TokenSequence = list[str]


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenSequence:
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if start < end:
            tokens.append(raw[start:end])
    return tokens


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


@dataclass
class NGramProfile:
    n: int
    total_count: int = 0
    frequencies: Counter = field(default_factory=Counter)

    @property
    def unique_count(self) -> int:
        return len(self.frequencies)

    def most_common(self, k: int) -> list[tuple[tuple[str, ...], int]]:
        return self.frequencies.most_common(k)


def ngram_profile(corpus: Iterable[Sequence[str]], n: int) -> NGramProfile:
    """Pooled sliding-window n-grams; sequences shorter than ``n`` contribute nothing."""
    profile = NGramProfile(n)
    for seq in corpus:
        grams = ngrams(seq, n)
        profile.frequencies.update(grams)
        profile.total_count += len(grams)
    return profile


def distinct_n(corpus: Iterable[Sequence[str]], n: int) -> float:
    profile = ngram_profile(corpus, n)
    if profile.total_count == 0:
        raise EmptyCorpus(f"corpus has no {n}-grams")
    return profile.unique_count / profile.total_count
