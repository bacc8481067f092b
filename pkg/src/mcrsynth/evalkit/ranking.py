from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from ..errors import EmptyRecords


@dataclass
class RecEvalRecord:
    conversation_id: str
    turn_index: int
    gold_product_id: str
    query: str
    candidates: list[str] = field(default_factory=list)
    context: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        self.candidates = [c for c in self.candidates if not (c in seen or seen.add(c))]

    def rank_of_gold(self) -> int | None:
        try:
            return self.candidates.index(self.gold_product_id) + 1
        except ValueError:
            return None


def recall_mrr(records: Sequence[RecEvalRecord], n: int) -> dict[str, float]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not records:
        raise EmptyRecords("no evaluation records")
    hits = 0
    rr = 0.0
    for record in records:
        rank = record.rank_of_gold()
        if rank is not None and rank <= n:
            hits += 1
            rr += 1.0 / rank
    return {f"recall@{n}": hits / len(records), f"mrr@{n}": rr / len(records)}
