"""Typed readers and writers for the inter-stage files."""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

from ..catalog import Catalog, VectorStore
from ..jsonl import read_jsonl, write_jsonl
from ..records import Conversation, Scenario, UserProfile

CATALOG = "catalog.jsonl"
INDEX = "index.json"
SUMMARY_CACHE = "cache/summaries.json"
SCENARIOS = "scenarios.jsonl"
PROFILES = "profiles.jsonl"
CONVERSATIONS = "conversations.jsonl"
ABANDONED = "abandoned.jsonl"
REVIEWED = "reviewed.jsonl"
CORPUS = "corpus.jsonl"
STATS = "stats.json"
GATES = "gates.json"
MANIFEST = "manifest.json"


def load_catalog(path: str | Path) -> Catalog:
    return Catalog.load(path)


def load_index(path: str | Path) -> VectorStore:
    return VectorStore.load(path)


def load_scenarios(path: str | Path) -> list[Scenario]:
    return [Scenario.model_validate(row) for row in read_jsonl(path)]


def save_scenarios(path: str | Path, scenarios: Iterable[Scenario]) -> int:
    return write_jsonl(path, "scenario", (s.to_json() for s in scenarios))


def load_profiles(path: str | Path) -> list[UserProfile]:
    return [UserProfile.model_validate(row) for row in read_jsonl(path)]


def save_profiles(path: str | Path, profiles: Iterable[UserProfile]) -> int:
    return write_jsonl(path, "user_profile", (p.to_json() for p in profiles))


def load_conversations(path: str | Path) -> list[Conversation]:
    return [Conversation.model_validate(row) for row in read_jsonl(path)]


def save_conversations(path: str | Path, conversations: Iterable[Conversation]) -> int:
    return write_jsonl(path, "conversation", (c.to_json() for c in conversations))
