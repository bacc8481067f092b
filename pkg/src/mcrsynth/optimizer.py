"""Post-hoc corpus optimization: supervised rewriting and quality review."""

from __future__ import annotations

import logging
import random
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

from . import gates as G
from . import prompts as P
from .errors import McrError
from .gateway import Gateway
from .records import Conversation, ReviewScore, Turn, UserProfile
from .seeding import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 5
DEFAULT_COLLOQUIAL_PROB = 0.35


@dataclass
class RewriteResult:
    original: Conversation
    rewritten: Conversation
    turn_verdicts: list[bool]
    colloquial: bool
    error: str | None = None

    @property
    def consistency_verdict(self) -> bool:
        return self.error is None and all(self.turn_verdicts)


def _rewrite_turn(turn: Turn, context: Sequence[Turn], gateway: Gateway, colloquial: bool,
                  seed: int) -> tuple[str, bool]:
    request = P.build_request(P.REWRITE, {
        "speaker": turn.speaker, "text": turn.text,
        "previous": context[-1].text if context else "",
    }, seed=derive_seed(seed, "rewrite"),
        extra_instruction=P.COLLOQUIAL_INSTRUCTION if colloquial else None)
    candidate = gateway.complete(request).text.strip()
    if not candidate:
        return turn.text, False
    if candidate == turn.text:
        return turn.text, True
    verdict = gateway.complete_json(P.build_request(P.SUPERVISE, {
        "original": turn.text, "rewritten": candidate,
    }, seed=derive_seed(seed, "supervise")), {"consistent": bool, "reason": str})
    return (candidate, True) if verdict["consistent"] else (turn.text, False)


def rewrite(conv: Conversation, gateway: Gateway, colloquial_prob: float = DEFAULT_COLLOQUIAL_PROB,
            *, seed: int = 0) -> RewriteResult:
    """Rewrite each turn's text at high temperature; a supervisor checks
    every rewrite against its original and rejected turns keep the original
    text.  Only ``text`` ever changes.  On any gateway failure the whole
    conversation is returned unchanged."""
    if not 0 <= colloquial_prob <= 1:
        raise ValueError("colloquial_prob must lie in [0, 1]")
    rng = random.Random(derive_seed(seed, "colloquial"))
    colloquial = rng.random() < colloquial_prob
    texts: list[str] = []
    verdicts: list[bool] = []
    try:
        for turn in conv.turns:
            text, ok = _rewrite_turn(turn, conv.turns[:turn.index], gateway, colloquial,
                                     derive_seed(seed, "turn", turn.index))
            texts.append(text)
            verdicts.append(ok)
    except McrError as exc:
        logger.warning("rewrite of %s failed, keeping the original: %s", conv.conversation_id, exc)
        return RewriteResult(conv, conv, [], colloquial, f"{type(exc).__name__}: {exc}")
    turns = [t.model_copy(update={"text": text}) for t, text in zip(conv.turns, texts)]
    return RewriteResult(conv, conv.model_copy(update={"turns": turns}), verdicts, colloquial)


def _scores_in_range(obj: dict[str, Any]) -> str | None:
    keys = ("content_quality", "logical_fluency", "user_consistency")
    bad = [k for k in keys if not 0 <= obj[k] <= 2]
    return f"scores must be 0-2: {bad}" if bad else None


def review(conv: Conversation, gateway: Gateway, threshold: int = DEFAULT_THRESHOLD, *,
           profile: UserProfile | None = None, seed: int = 0) -> ReviewScore:
    """Three 0-2 sub-scores; passes when their sum reaches ``threshold``.
    Unusable reviewer output fails the conversation."""
    payload: dict[str, Any] = {"conversation": P.transcript(conv.turns)}
    if profile is not None:
        payload["profile"] = {"basic": profile.basic.to_json(), "backstory": profile.backstory,
                              "scenario_requirements": profile.scenario_requirements,
                              "target_requirements": profile.target_requirements}
    request = P.build_request(P.REVIEW, payload, seed=derive_seed(seed, "review"))
    try:
        obj = gateway.complete_json(request, {"content_quality": int, "logical_fluency": int,
                                              "user_consistency": int, "reason": str}, _scores_in_range)
    except McrError as exc:
        logger.warning("review of %s failed closed: %s", conv.conversation_id, exc)
        return ReviewScore.failed_closed(threshold, f"review failed: {type(exc).__name__}")
    return ReviewScore.from_scores(obj["content_quality"], obj["logical_fluency"],
                                   obj["user_consistency"], threshold, obj["reason"] or None)


def filter_corpus(conversations: Sequence[Conversation], threshold: int = DEFAULT_THRESHOLD,
                  gates: G.GateReport | None = None) -> tuple[list[Conversation], dict[str, Any]]:
    """Keep reviewed conversations whose score passes ``threshold``.

    Unreviewed conversations count as failures.  The report is the gate
    table (all screenings recorded so far, if ``gates`` is given).
    """
    gates = gates if gates is not None else G.GateReport()
    retained = []
    for conv in conversations:
        ok = conv.review is not None and conv.review.passed and conv.review.total >= threshold
        gates.record(G.CONVERSATION_REVIEW, ok)
        if ok:
            retained.append(conv)
    return retained, gates.to_json()


@dataclass
class OptimizeBatch:
    retained: list[Conversation]
    reviewed: list[Conversation]
    gates: G.GateReport
    rewrite_failures: int
    colloquial: int

    def to_json(self) -> dict[str, Any]:
        return {"input": len(self.reviewed), "retained": len(self.retained),
                "rewrite_failures": self.rewrite_failures, "colloquial": self.colloquial,
                "gates": self.gates.to_json()}


def optimize_batch(conversations: Sequence[Conversation], gateway: Gateway, *,
                   profiles: Mapping[str, UserProfile] | None = None,
                   colloquial_prob: float = DEFAULT_COLLOQUIAL_PROB,
                   threshold: int = DEFAULT_THRESHOLD, rewrite_enabled: bool = True,
                   seed: int = 0, workers: int = 8) -> OptimizeBatch:
    profiles = profiles or {}

    def one(conv: Conversation) -> tuple[Conversation, RewriteResult | None]:
        cseed = derive_seed(seed, conv.conversation_id)
        result = rewrite(conv, gateway, colloquial_prob, seed=cseed) if rewrite_enabled else None
        target = result.rewritten if result else conv
        score = review(target, gateway, threshold, profile=profiles.get(conv.profile_id), seed=cseed)
        return target.model_copy(update={"review": score}), result

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        done = list(pool.map(one, conversations))
    gates = G.GateReport()
    failures = colloquial = 0
    for _, result in done:
        if result is None:
            continue
        if result.error:
            failures += 1
        colloquial += result.colloquial
        for ok in result.turn_verdicts:
            gates.record(G.REWRITE_CONSISTENCY, ok)
    reviewed = [conv for conv, _ in done]
    retained, _ = filter_corpus(reviewed, threshold, gates)
    return OptimizeBatch(retained, reviewed, gates, failures, colloquial)
