from __future__ import annotations

import threading
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from .types import Usage


@dataclass(frozen=True)
class Pricing:
    """USD per 1k prompt tokens, per 1k completion tokens, and per image."""

    prompt_per_1k: float = 0.0
    completion_per_1k: float = 0.0
    per_image: float = 0.0

    def cost(self, usage: Usage) -> float:
        return (usage.prompt_tokens / 1000 * self.prompt_per_1k
                + usage.completion_tokens / 1000 * self.completion_per_1k
                + usage.image_count * self.per_image)


class CostLedger:
    """Thread-safe per-tag accumulation of usage, call counts and estimated cost."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._usage: dict[str, Usage] = {}
        self._calls: dict[str, int] = {}
        self._failures: dict[str, int] = {}
        self._cost: dict[str, float] = {}

    def record(self, tag: str, usage: Usage, pricing: Pricing | None = None) -> None:
        cost = pricing.cost(usage) if pricing else 0.0
        with self._lock:
            self._usage[tag] = self._usage.get(tag, Usage()) + usage
            self._calls[tag] = self._calls.get(tag, 0) + 1
            self._cost[tag] = self._cost.get(tag, 0.0) + cost

    def record_failure(self, tag: str) -> None:
        with self._lock:
            self._failures[tag] = self._failures.get(tag, 0) + 1

    def report(self) -> dict[str, Any]:
        with self._lock:
            tags = sorted(set(self._calls) | set(self._failures))
            rows = {tag: self._row(tag) for tag in tags}
        total = {"calls": 0, "failures": 0, "prompt_tokens": 0, "completion_tokens": 0,
                 "image_count": 0, "cost_usd": 0.0}
        for row in rows.values():
            for key in total:
                total[key] += row[key]
        return {"by_tag": rows, "total": total}

    def _row(self, tag: str) -> dict[str, Any]:
        usage = self._usage.get(tag, Usage())
        return {
            "calls": self._calls.get(tag, 0),
            "failures": self._failures.get(tag, 0),
            "prompt_tokens": usage.prompt_tokens,
            "completion_tokens": usage.completion_tokens,
            "image_count": usage.image_count,
            "cost_usd": self._cost.get(tag, 0.0),
        }

    def merge_report(self, report: Mapping[str, Any]) -> None:
        """Fold a previously exported report back in (used when resuming runs)."""
        with self._lock:
            for tag, row in report.get("by_tag", {}).items():
                self._usage[tag] = self._usage.get(tag, Usage()) + Usage(
                    row["prompt_tokens"], row["completion_tokens"], row["image_count"])
                self._calls[tag] = self._calls.get(tag, 0) + row["calls"]
                self._failures[tag] = self._failures.get(tag, 0) + row.get("failures", 0)
                self._cost[tag] = self._cost.get(tag, 0.0) + row.get("cost_usd", 0.0)
