from __future__ import annotations

from collections import Counter
from collections.abc import Sequence

from ..errors import EmptyInput


def _f1(overlap: float, cand_len: int, ref_len: int) -> float:
    if overlap == 0:
        return 0.0
    precision = overlap / cand_len
    recall = overlap / ref_len
    return 2 * precision * recall / (precision + recall)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, float]:
    """ROUGE-1 F1 (clipped unigram overlap) and ROUGE-L F1 (LCS, beta = 1)."""
    if not candidate or not reference:
        raise EmptyInput("ROUGE needs non-empty candidate and reference")
    overlap = sum((Counter(candidate) & Counter(reference)).values())
    return {
        "rouge1_f": _f1(overlap, len(candidate), len(reference)),
        "rougeL_f": _f1(lcs_length(candidate, reference), len(candidate), len(reference)),
    }
