"""Pass/reject accounting for the automatic screenings along the pipeline."""

from __future__ import annotations

import threading
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

SCENARIO_DEDUP = "scenario_dedup"
TRIPLE_RATIONALITY = "triple_rationality"
BACKSTORY_DEDUP = "backstory_dedup"
REWRITE_CONSISTENCY = "rewrite_consistency"
CONVERSATION_REVIEW = "conversation_review"

SCREENINGS = (SCENARIO_DEDUP, TRIPLE_RATIONALITY, BACKSTORY_DEDUP, REWRITE_CONSISTENCY,
              CONVERSATION_REVIEW)


@dataclass
class GateCount:
    generated: int = 0
    retained: int = 0
    rejected: int = 0

    @property
    def pass_rate(self) -> float | None:
        return self.retained / self.generated if self.generated else None

    def reconciles(self) -> bool:
        return self.generated == self.retained + self.rejected

    def to_json(self) -> dict[str, Any]:
        return {"generated": self.generated, "retained": self.retained, "rejected": self.rejected,
                "pass_rate": self.pass_rate}


class GateReport:
    """Thread-safe counters keyed by screening name, kept in pipeline order."""

    def __init__(self) -> None:
        self._gates: dict[str, GateCount] = {}
        self._lock = threading.Lock()

    def record(self, gate: str, passed: bool, n: int = 1) -> None:
        with self._lock:
            count = self._gates.setdefault(gate, GateCount())
            count.generated += n
            if passed:
                count.retained += n
            else:
                count.rejected += n

    def merge(self, other: "GateReport") -> None:
        for name, count in other.items():
            with self._lock:
                mine = self._gates.setdefault(name, GateCount())
                mine.generated += count.generated
                mine.retained += count.retained
                mine.rejected += count.rejected

    def items(self) -> list[tuple[str, GateCount]]:
        with self._lock:
            return list(self._gates.items())

    def __getitem__(self, gate: str) -> GateCount:
        return self._gates.get(gate, GateCount())

    def reconciles(self) -> bool:
        return all(count.reconciles() for _, count in self.items())

    def to_json(self) -> dict[str, Any]:
        ordered = sorted(self.items(), key=lambda kv: (
            SCREENINGS.index(kv[0]) if kv[0] in SCREENINGS else len(SCREENINGS), kv[0]))
        return {name: count.to_json() for name, count in ordered}

    @classmethod
    def from_json(cls, data: Mapping[str, Mapping[str, Any]]) -> "GateReport":
        report = cls()
        for name, row in data.items():
            report._gates[name] = GateCount(int(row["generated"]), int(row["retained"]),
                                            int(row["rejected"]))
        return report
