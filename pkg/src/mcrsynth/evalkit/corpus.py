"""Corpus-level statistics over synthesized or published conversations."""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from ..errors import EmptyCorpus
from ..records import Conversation
from .text import ngram_profile, tokenize

ORDERS = (2, 3, 4)


@dataclass(frozen=True)
class CorpusStats:
    dialogues: int
    utterances: int
    users: int
    items: int
    images: int
    distinct_2: float
    distinct_3: float
    distinct_4: float
    avg_words_per_turn: float
    # unique n-grams per dialogue
    ngram_specificity_2: float
    ngram_specificity_3: float
    ngram_specificity_4: float
    unique_4grams: int
    total_4grams: int

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def text_stats(dialogues: Sequence[Sequence[str]], *, users: int = 0, items: int = 0,
               images: int = 0) -> CorpusStats:
    """Statistics over raw utterance texts grouped by dialogue.

    Each utterance is its own n-gram window; n-grams never span turns.
    """
    if not dialogues:
        raise EmptyCorpus("no dialogues")
    seqs = [tokenize(text) for dialogue in dialogues for text in dialogue]
    if not seqs:
        raise EmptyCorpus("dialogues contain no utterances")
    profiles = {n: ngram_profile(seqs, n) for n in ORDERS}
    for n, profile in profiles.items():
        if profile.total_count == 0:
            raise EmptyCorpus(f"corpus has no {n}-grams")
    d = len(dialogues)
    return CorpusStats(
        dialogues=d,
        utterances=len(seqs),
        users=users,
        items=items,
        images=images,
        distinct_2=profiles[2].unique_count / profiles[2].total_count,
        distinct_3=profiles[3].unique_count / profiles[3].total_count,
        distinct_4=profiles[4].unique_count / profiles[4].total_count,
        avg_words_per_turn=sum(map(len, seqs)) / len(seqs),
        ngram_specificity_2=profiles[2].unique_count / d,
        ngram_specificity_3=profiles[3].unique_count / d,
        ngram_specificity_4=profiles[4].unique_count / d,
        unique_4grams=profiles[4].unique_count,
        total_4grams=profiles[4].total_count,
    )


def corpus_stats(conversations: Sequence[Conversation]) -> CorpusStats:
    if not conversations:
        raise EmptyCorpus("no conversations")
    items: set[str] = set()
    images: set[str] = set()
    for conv in conversations:
        items.add(conv.target_product_id)
        if conv.outfit_item_id:
            items.add(conv.outfit_item_id)
        for turn in conv.turns:
            if turn.product_id:
                items.add(turn.product_id)
            images.update(turn.image_refs)
    return text_stats([[t.text for t in c.turns] for c in conversations],
                      users=len({c.profile_id for c in conversations}),
                      items=len(items), images=len(images))


# Field names tried, in order, when reading corpora produced by other tools.
_TURN_KEYS = ("turns", "utterances", "dialogue", "dialog", "conversation", "messages", "content")
_TEXT_KEYS = ("text", "utterance", "content", "value", "message")


def _turn_text(turn: Any) -> str | None:
    if isinstance(turn, str):
        return turn
    if isinstance(turn, dict):
        for key in _TEXT_KEYS:
            value = turn.get(key)
            if isinstance(value, str):
                return value
    return None


def _dialogue_texts(obj: Any) -> list[str] | None:
    if isinstance(obj, list):
        texts = [_turn_text(t) for t in obj]
        return [t for t in texts if t is not None] if any(t is not None for t in texts) else None
    if isinstance(obj, dict):
        for key in _TURN_KEYS:
            if key in obj:
                found = _dialogue_texts(obj[key])
                if found:
                    return found
    return None


def _iter_objects(path: Path) -> Iterable[Any]:
    raw = path.read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        for line in raw.splitlines():
            if line.strip():
                yield json.loads(line)
        return
    if isinstance(data, dict):
        values = list(data.values())
        if all(isinstance(v, (dict, list)) for v in values):
            # either {id: dialogue} or a single wrapper like {"data": [...]}
            if len(values) == 1 and isinstance(values[0], list):
                yield from values[0]
            else:
                yield from values
            return
    if isinstance(data, list):
        yield from data
    else:
        yield data


def load_dialogue_texts(path: str | Path) -> list[list[str]]:
    """Utterance texts per dialogue from JSON or JSONL in several common layouts.

    Header records and objects with no recognisable turn list are skipped.
    """
    dialogues = []
    for obj in _iter_objects(Path(path)):
        if isinstance(obj, dict) and obj.get("__header__"):
            continue
        texts = _dialogue_texts(obj)
        if texts:
            dialogues.append(texts)
    return dialogues
