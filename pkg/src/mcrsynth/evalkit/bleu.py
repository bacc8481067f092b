"""Sentence-level BLEU with clipped n-gram precision and brevity penalty.

Conventions:

* an order whose modified precision has a zero numerator is smoothed to
  ``epsilon / total`` (``epsilon = 1e-9``), so short texts with partial
  overlap still get a graded score;
* no unigram overlap at all scores exactly 0;
* orders for which the candidate has no n-grams (candidate shorter than the
  order) are left out and the remaining weights renormalised, so a short
  candidate identical to its reference scores 1;
* brevity penalty uses the reference length closest to the candidate
  length, preferring the shorter one on ties.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

from ..errors import EmptyInput, EmptyReference
from .text import ngrams

EPSILON = 1e-9


def _counts(tokens: Sequence[str], max_n: int) -> list[Counter]:
    return [Counter(ngrams(tokens, n)) for n in range(1, max_n + 1)]


class BleuReference:
    """Pre-counted reference set, reusable across many candidates."""

    def __init__(self, references: Sequence[Sequence[str]], max_n: int = 4) -> None:
        refs = [list(r) for r in references]
        if not refs or all(len(r) == 0 for r in refs):
            raise EmptyReference("at least one non-empty reference is required")
        self.max_n = max_n
        self.lengths = [len(r) for r in refs]
        self.max_counts: list[Counter] = [Counter() for _ in range(max_n)]
        for ref in refs:
            for i, counts in enumerate(_counts(ref, max_n)):
                self.max_counts[i] |= counts

    def score(self, candidate: Sequence[str], cand_counts: list[Counter] | None = None) -> float:
        if not candidate:
            raise EmptyInput("candidate must be non-empty")
        cand_counts = cand_counts or _counts(candidate, self.max_n)
        log_sum = 0.0
        orders = 0
        for i, counts in enumerate(cand_counts[:self.max_n]):
            total = sum(counts.values())
            if total == 0:
                continue
            matches = sum(min(c, self.max_counts[i][g]) for g, c in counts.items())
            if i == 0 and matches == 0:
                return 0.0
            log_sum += math.log((matches if matches else EPSILON) / total)
            orders += 1
        c = len(candidate)
        r = min(self.lengths, key=lambda length: (abs(length - c), length))
        bp = 1.0 if c > r else math.exp(1 - r / c)
        return bp * math.exp(log_sum / orders)


def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    return BleuReference(references, max_n).score(candidate)


class BleuDeduper:
    """Keeps a set of texts whose pairwise BLEU stays below ``threshold``.

    BLEU is asymmetric, so a candidate is rejected when either direction
    against any retained text reaches the threshold.
    """

    def __init__(self, threshold: float, max_n: int = 4) -> None:
        if not 0 < threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        self.threshold = threshold
        self.max_n = max_n
        self._items: list[tuple[list[str], list[Counter], BleuReference]] = []

    def __len__(self) -> int:
        return len(self._items)

    def max_similarity(self, tokens: Sequence[str]) -> float:
        tokens = list(tokens)
        if not tokens:
            return 1.0
        counts = _counts(tokens, self.max_n)
        as_ref = BleuReference([tokens], self.max_n)
        best = 0.0
        for other, other_counts, other_ref in self._items:
            best = max(best, other_ref.score(tokens, counts), as_ref.score(other, other_counts))
            if best >= self.threshold:
                break
        return best

    def is_duplicate(self, tokens: Sequence[str]) -> bool:
        return self.max_similarity(tokens) >= self.threshold

    def add(self, tokens: Sequence[str]) -> None:
        tokens = list(tokens)
        if not tokens:
            raise EmptyInput("cannot retain an empty text")
        self._items.append((tokens, _counts(tokens, self.max_n), BleuReference([tokens], self.max_n)))

    def offer(self, tokens: Sequence[str]) -> bool:
        """Retain ``tokens`` unless it duplicates a retained text; returns whether kept."""
        if self.is_duplicate(tokens):
            return False
        self.add(tokens)
        return True
