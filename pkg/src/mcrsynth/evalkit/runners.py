"""Model-facing evaluation runners: query generation for retrieval, the
five-dimension conversation judge, and response-generation metrics."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Any

from .. import prompts as P
from ..catalog import Retriever
from ..errors import EmptyInput, EmptyRecords, McrError, StructuredOutputError
from ..gateway import Gateway
from ..records import Conversation
from ..seeding import derive_seed
from .bleu import bleu
from .ranking import RecEvalRecord, recall_mrr
from .rouge import rouge
from .text import distinct_n, tokenize

logger = logging.getLogger(__name__)

JUDGE_DIMENSIONS = ("natural", "logical", "informative", "pc_correlation", "it_correspondence")


def evaluation_points(conv: Conversation, mode: str = "recommend") -> list[int]:
    """Indices of turns whose product the model must retrieve from the preceding context."""
    picks = [t.index for t in conv.turns if t.action in ("recommend", "provide_target") and t.product_id]
    if mode == "recommend":
        return picks
    if mode == "final":
        return picks[-1:]
    raise ValueError(f"unknown evaluation point mode {mode!r}")


@dataclass
class RecEvalResult:
    metrics: dict[str, float]
    records: list[RecEvalRecord]
    skipped: int

    def to_json(self) -> dict[str, Any]:
        return {"records": len(self.records), "skipped": self.skipped, **self.metrics}


def rec_eval_run(corpus: Sequence[Conversation], gateway: Gateway, retriever: Retriever,
                 n_values: Sequence[int] = (10, 20), *, points: str = "recommend",
                 seed: int = 0, workers: int = 8) -> RecEvalResult:
    depth = max(n_values)
    jobs = [(conv, i) for conv in corpus for i in evaluation_points(conv, points)]

    def one(job: tuple[Conversation, int]) -> RecEvalRecord | None:
        conv, idx = job
        context = conv.turns[:idx]
        images = [ref for t in context for ref in t.image_refs]
        request = P.build_request(P.REC_QUERY, {"conversation": P.transcript(context)}, images=images,
                                  seed=derive_seed(seed, conv.conversation_id, idx))
        try:
            query = gateway.complete(request).text.strip()
            hits = retriever.search(query or " ", depth)
        except McrError as exc:
            logger.warning("skipping %s turn %d: %s", conv.conversation_id, idx, exc)
            return None
        return RecEvalRecord(conv.conversation_id, idx, conv.turns[idx].product_id or "", query,
                             [h.product_id for h in hits], P.transcript(context))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, jobs))
    records = [r for r in results if r is not None]
    if not records:
        raise EmptyRecords("no evaluation point produced a ranked list")
    metrics: dict[str, float] = {}
    for n in sorted(n_values):
        metrics.update(recall_mrr(records, n))
    return RecEvalResult(metrics, records, len(results) - len(records))


@dataclass
class JudgeReport:
    means: dict[str, float]
    scored: int
    excluded: int
    rounds: int
    per_conversation: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"means": self.means, "scored": self.scored, "excluded": self.excluded,
                "rounds": self.rounds, "per_conversation": self.per_conversation}


def _valid_scores(obj: dict[str, Any]) -> str | None:
    bad = [k for k in JUDGE_DIMENSIONS if not 0 <= obj[k] <= 2]
    return f"scores out of 0-2 range: {bad}" if bad else None


def judge_conversations(sample: Sequence[Conversation], gateway: Gateway, *, rounds: int = 3,
                        seed: int = 0, workers: int = 8) -> JudgeReport:
    """Score each conversation ``rounds`` times on five 0-2 dimensions and average.

    A conversation whose judging fails in any round is excluded.
    """
    if not sample:
        raise EmptyInput("nothing to judge")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    schema = {k: int for k in JUDGE_DIMENSIONS}

    def one(conv: Conversation) -> dict[str, float] | None:
        images = [ref for t in conv.turns for ref in t.image_refs]
        totals = {k: 0.0 for k in JUDGE_DIMENSIONS}
        for r in range(rounds):
            request = P.build_request(P.JUDGE, {"conversation": P.transcript(conv.turns)}, images=images,
                                      seed=derive_seed(seed, conv.conversation_id, "judge", r))
            try:
                obj = gateway.complete_json(request, schema, _valid_scores)
            except (StructuredOutputError, McrError) as exc:
                logger.warning("judge excluded %s: %s", conv.conversation_id, exc)
                return None
            for k in JUDGE_DIMENSIONS:
                totals[k] += obj[k]
        return {k: v / rounds for k, v in totals.items()}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        scores = list(pool.map(one, sample))
    per = {c.conversation_id: s for c, s in zip(sample, scores) if s is not None}
    means = {k: fmean(s[k] for s in per.values()) for k in JUDGE_DIMENSIONS} if per else {}
    return JudgeReport(means, len(per), len(sample) - len(per), rounds, per)


def response_metrics(predictions: Sequence[str], golds: Sequence[str]) -> dict[str, float]:
    """Mean sentence BLEU-4, ROUGE-1 F1 and ROUGE-L F1 against the gold responses, plus
    distinct-4 and mean word count of the predictions.  Empty predictions score 0."""
    if len(predictions) != len(golds):
        raise ValueError("predictions and golds differ in length")
    if not predictions:
        raise EmptyInput("no responses to evaluate")
    b, r1, rl = [], [], []
    pred_tokens = [tokenize(p) for p in predictions]
    for cand, gold in zip(pred_tokens, golds):
        ref = tokenize(gold)
        if not ref:
            raise EmptyInput("gold response with no tokens")
        if not cand:
            b.append(0.0)
            r1.append(0.0)
            rl.append(0.0)
            continue
        b.append(bleu(cand, [ref]))
        scores = rouge(cand, ref)
        r1.append(scores["rouge1_f"])
        rl.append(scores["rougeL_f"])
    has_4grams = any(len(t) >= 4 for t in pred_tokens)
    return {
        "count": len(predictions),
        "bleu4": fmean(b),
        "rouge1": fmean(r1),
        "rougeL": fmean(rl),
        "distinct4": distinct_n(pred_tokens, 4) if has_4grams else 0.0,
        "avg_words": fmean(len(t) for t in pred_tokens),
    }


def load_responses(path: str | Path) -> list[tuple[str | None, str]]:
    """Responses as ``(id, text)``.  JSONL lines may be objects with ``id`` and
    ``text``/``response`` or bare JSON strings; other lines are taken verbatim."""
    out: list[tuple[str | None, str]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            out.append((None, line))
            continue
        if isinstance(obj, dict):
            if obj.get("__header__"):
                continue
            text = obj.get("text", obj.get("response", ""))
            ident = obj.get("id")
            out.append((None if ident is None else str(ident), str(text)))
        elif isinstance(obj, str):
            out.append((None, obj))
        else:
            out.append((None, line))
    return out


def pair_responses(preds: list[tuple[str | None, str]],
                   golds: list[tuple[str | None, str]]) -> tuple[list[str], list[str]]:
    """Pair by id when every record has one, else by position."""
    if all(i is not None for i, _ in preds + golds):
        gold_by_id = dict(golds)
        missing = [i for i, _ in preds if i not in gold_by_id]
        if missing:
            raise ValueError(f"{len(missing)} predictions have no gold, e.g. {missing[0]}")
        return [t for _, t in preds], [gold_by_id[i] for i, _ in preds]  # type: ignore[index]
    if len(preds) != len(golds):
        raise ValueError("prediction and gold files differ in length")
    return [t for _, t in preds], [t for _, t in golds]
