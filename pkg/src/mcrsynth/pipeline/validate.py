"""Schema and referential checks over a conversation corpus file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from ..catalog import Catalog
from ..dialogue import SimConfig, check_conversation
from ..jsonl import iter_jsonl, read_header
from ..records import Conversation, UserProfile


@dataclass
class Violation:
    line: int
    conversation_id: str | None
    message: str


@dataclass
class ValidationReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict[str, Any]:
        return {"checked": self.checked, "violations": len(self.violations),
                "details": [v.__dict__ for v in self.violations]}


def validate_corpus(path: str | Path, *, catalog: Catalog | None = None,
                    profiles: dict[str, UserProfile] | None = None,
                    config: SimConfig | None = None) -> ValidationReport:
    """Check every line against the Conversation schema, the structural
    invariants and, when stores are given, references to products and profiles."""
    report = ValidationReport()
    head = read_header(path)
    if head is not None and head.get("schema") != "conversation":
        report.violations.append(Violation(1, None, f"header schema is {head.get('schema')!r}"))
    seen: set[str] = set()
    for lineno, obj in iter_jsonl(path):
        report.checked += 1
        if isinstance(obj, json.JSONDecodeError):
            report.violations.append(Violation(lineno, None, f"invalid JSON: {obj.msg}"))
            continue
        cid = obj.get("conversation_id") if isinstance(obj, dict) else None
        try:
            conv = Conversation.model_validate(obj)
        except ValidationError as exc:
            for err in exc.errors():
                loc = ".".join(str(p) for p in err["loc"])
                report.violations.append(Violation(lineno, cid, f"schema: {loc}: {err['msg']}"))
            continue
        if conv.conversation_id in seen:
            report.violations.append(Violation(lineno, cid, "duplicate conversation_id"))
        seen.add(conv.conversation_id)
        profile = None
        if profiles is not None:
            profile = profiles.get(conv.profile_id)
            if profile is None:
                report.violations.append(Violation(lineno, cid, f"unknown profile_id {conv.profile_id}"))
        if catalog is not None and conv.target_product_id not in catalog:
            report.violations.append(Violation(lineno, cid, f"unknown target product {conv.target_product_id}"))
        for problem in check_conversation(conv, profile=profile, catalog=catalog, config=config):
            report.violations.append(Violation(lineno, cid, problem))
    return report
