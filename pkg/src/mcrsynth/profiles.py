"""Scenario expansion and scenario-grounded user profile generation."""

from __future__ import annotations

import logging
import random
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from pydantic import ValidationError

from . import gates as G
from . import prompts as P
from .catalog import Retriever
from .errors import DedupExhausted, ExpansionStalled, McrError, StructuredOutputError
from .evalkit.bleu import BleuDeduper
from .evalkit.text import tokenize
from .gateway import Gateway
from .records import BasicUserInfo, Product, Scenario, UserProfile
from .seeding import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.6


# ---------------------------------------------------------------------------
# scenarios


def expand_scenarios(
    seeds: Sequence[Scenario],
    target_count: int,
    gateway: Gateway,
    tau: float = DEFAULT_TAU,
    *,
    stall_limit: int = 20,
    batch_size: int = 8,
    examples_per_call: int = 6,
    seed: int = 0,
    gates: G.GateReport | None = None,
) -> list[Scenario]:
    """Grow ``seeds`` toward ``target_count`` by asking for new situations in
    the style of sampled examples, keeping only candidates whose BLEU-4
    against every retained scenario stays below ``tau``."""
    if not seeds:
        raise ValueError("at least one seed scenario is required")
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    retained = list(seeds)
    deduper = BleuDeduper(tau)
    for s in seeds:
        deduper.add(tokenize(s.text) or [s.scenario_id])
    rng = random.Random(derive_seed(seed, "scenario-examples"))
    stalled = 0
    call = 0
    while len(retained) < target_count:
        want = min(batch_size, target_count - len(retained))
        examples = rng.sample([s.text for s in retained], min(examples_per_call, len(retained)))
        request = P.build_request(P.SCENARIO_EXPAND, {"examples": examples, "count": want},
                                  seed=derive_seed(seed, "expand", call))
        call += 1
        reply = gateway.complete_json(request, {"scenarios": [str]})
        candidates = [c.strip() for c in reply["scenarios"] if c.strip()]
        if not candidates:
            stalled += 1
        for text in candidates:
            if len(retained) >= target_count:
                break
            kept = deduper.offer(tokenize(text))
            if gates is not None:
                gates.record(G.SCENARIO_DEDUP, kept)
            if kept:
                retained.append(Scenario(scenario_id=f"scn-{len(retained):04d}", text=text))
                stalled = 0
            else:
                stalled += 1
        if stalled >= stall_limit:
            raise ExpansionStalled(
                f"{stalled} consecutive duplicate generations with {len(retained)} scenarios retained")
    return retained


# ---------------------------------------------------------------------------
# single-profile operations


@dataclass(frozen=True)
class TripleVerdict:
    user_product_match: bool
    scenario_product_match: bool
    rationale: str

    @property
    def accepted(self) -> bool:
        return self.user_product_match and self.scenario_product_match


def generate_basic_user(gateway: Gateway, *, seed: int = 0, max_attempts: int = 5) -> BasicUserInfo:
    """Ask for a persona, regenerating while it violates the field invariants (e.g. age)."""
    schema = {"age": int, "gender": str, "occupation": str, "notes": str}
    problem = ""
    for attempt in range(max_attempts):
        request = P.build_request(P.BASIC_USER, {"attempt": attempt}, seed=derive_seed(seed, "user", attempt))
        obj = gateway.complete_json(request, schema)
        try:
            return BasicUserInfo(age=obj["age"], gender=obj["gender"].strip(),
                                 occupation=obj["occupation"].strip(), notes=obj["notes"].strip())
        except ValidationError as exc:
            problem = f"{exc.error_count()} invalid field(s): {exc.errors()[0]['msg']}"
            logger.debug("regenerating basic user: %s", problem)
    raise StructuredOutputError(P.BASIC_USER, problem, "")


def _product_view(product: Product) -> dict[str, Any]:
    return {"product_id": product.product_id, "title": product.title,
            "summary": product.summary or product.description}


def screen_triple(user: BasicUserInfo, scenario: Scenario, product: Product, gateway: Gateway,
                  *, seed: int = 0) -> TripleVerdict:
    if not product.summary or not product.image_ref:
        raise ValueError("product needs a summary and an image for screening")
    request = P.build_request(P.SCREEN_TRIPLE, {
        "user": user.to_json(), "scenario": scenario.text, "product": _product_view(product),
    }, images=[product.image_ref], seed=seed)
    obj = gateway.complete_json(request, {"user_product_match": bool,
                                          "scenario_product_match": bool, "rationale": str})
    return TripleVerdict(obj["user_product_match"], obj["scenario_product_match"], obj["rationale"])


def generate_backstory(user: BasicUserInfo, scenario: Scenario, product: Product, gateway: Gateway,
                       deduper: BleuDeduper, *, retries: int = 3, seed: int = 0,
                       gates: G.GateReport | None = None) -> str:
    """Write a backstory that is not a near-copy of any retained one.

    The deduper is shared state: callers must not run this concurrently on
    the same deduper.
    """
    for attempt in range(retries + 1):
        request = P.build_request(P.BACKSTORY, {
            "user": user.to_json(), "scenario": scenario.text,
            "product_summary": product.summary or product.description,
        }, images=[product.image_ref], seed=derive_seed(seed, "backstory", attempt))
        text = gateway.complete(request).text.strip()
        kept = bool(text) and deduper.offer(tokenize(text))
        if gates is not None:
            gates.record(G.BACKSTORY_DEDUP, kept)
        if kept:
            return text
    raise DedupExhausted(f"no novel backstory after {retries + 1} attempts")


def _requirements_ok(obj: dict[str, Any]) -> str | None:
    for key in ("scenario_requirements", "target_requirements"):
        if not [r for r in obj[key] if r.strip()]:
            return f"{key} must list at least one requirement"
    return None


def assemble_profile(profile_id: str, user: BasicUserInfo, scenario: Scenario, product: Product,
                     backstory: str, gateway: Gateway, *, seed: int = 0) -> UserProfile:
    request = P.build_request(P.REQUIREMENTS, {
        "user": user.to_json(), "scenario": scenario.text, "backstory": backstory,
        "product_summary": product.summary or product.description,
    }, images=[product.image_ref], seed=seed)
    obj = gateway.complete_json(request, {"scenario_requirements": [str], "target_requirements": [str]},
                                _requirements_ok)
    return UserProfile(
        profile_id=profile_id, basic=user, scenario_id=scenario.scenario_id,
        target_product_id=product.product_id, backstory=backstory,
        scenario_requirements=[r.strip() for r in obj["scenario_requirements"] if r.strip()],
        target_requirements=[r.strip() for r in obj["target_requirements"] if r.strip()],
    )


# ---------------------------------------------------------------------------
# batch generation


@dataclass(frozen=True)
class ProfileConfig:
    count: int = 40
    tau: float = DEFAULT_TAU
    candidate_pool: int = 20
    backstory_retries: int = 3
    basic_user_attempts: int = 5
    wave_size: int = 32
    max_attempts_per_profile: int = 50


@dataclass
class _Attempt:
    index: int
    scenario: Scenario | None = None
    product: Product | None = None
    user: BasicUserInfo | None = None
    verdict: TripleVerdict | None = None
    backstory: str | None = None
    profile: UserProfile | None = None
    failure: str | None = None
    gates: G.GateReport = field(default_factory=G.GateReport)


@dataclass
class ProfileBatch:
    profiles: list[UserProfile]
    gates: G.GateReport
    attempts: int
    failures: Counter

    def to_json(self) -> dict[str, Any]:
        return {"profiles": len(self.profiles), "attempts": self.attempts,
                "failures": dict(sorted(self.failures.items())), "gates": self.gates.to_json()}


class ProfileGenerator:
    """Produces ``count`` profiles from numbered attempts.

    Each attempt draws a scenario, a user and a candidate product from the
    scenario's top search hits, then screens the triple.  Screening runs in
    parallel; backstory deduplication runs in attempt order, so the result
    does not depend on the worker count.  Attempts past the one that
    completes the batch are discarded along with their gate counts.
    """

    def __init__(self, gateway: Gateway, retriever: Retriever, scenarios: Sequence[Scenario],
                 config: ProfileConfig | None = None, *, seed: int = 0, workers: int = 8) -> None:
        if not scenarios:
            raise ValueError("no scenarios to draw from")
        self.gateway = gateway
        self.retriever = retriever
        self.scenarios = list(scenarios)
        self.config = config or ProfileConfig()
        self.seed = seed
        self.workers = max(1, workers)
        self.deduper = BleuDeduper(self.config.tau)

    def _screen(self, att: _Attempt) -> _Attempt:
        rng = random.Random(derive_seed(self.seed, "attempt", att.index))
        try:
            att.scenario = rng.choice(self.scenarios)
            hits = self.retriever.search(att.scenario.text, self.config.candidate_pool)
            att.product = self.retriever.catalog[rng.choice(hits).product_id]
            att.user = generate_basic_user(self.gateway, seed=derive_seed(self.seed, "user", att.index),
                                           max_attempts=self.config.basic_user_attempts)
            att.verdict = screen_triple(att.user, att.scenario, att.product, self.gateway,
                                        seed=derive_seed(self.seed, "screen", att.index))
        except McrError as exc:
            att.failure = type(exc).__name__
            return att
        att.gates.record(G.TRIPLE_RATIONALITY, att.verdict.accepted)
        if not att.verdict.accepted:
            att.failure = "triple_rejected"
        return att

    def _backstory(self, att: _Attempt) -> None:
        assert att.user and att.scenario and att.product
        try:
            att.backstory = generate_backstory(
                att.user, att.scenario, att.product, self.gateway, self.deduper,
                retries=self.config.backstory_retries, seed=derive_seed(self.seed, "story", att.index),
                gates=att.gates)
        except McrError as exc:
            att.failure = type(exc).__name__

    def _assemble(self, att: _Attempt) -> _Attempt:
        assert att.user and att.scenario and att.product and att.backstory
        try:
            att.profile = assemble_profile(f"tmp-{att.index}", att.user, att.scenario, att.product,
                                           att.backstory, self.gateway,
                                           seed=derive_seed(self.seed, "requirements", att.index))
        except (McrError, ValidationError) as exc:
            att.failure = type(exc).__name__
        return att

    def generate(self, count: int | None = None) -> ProfileBatch:
        count = self.config.count if count is None else count
        limit = count * self.config.max_attempts_per_profile
        done: list[_Attempt] = []
        produced = 0
        next_index = 0
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            while produced < count and next_index < limit:
                wave = [_Attempt(i) for i in range(next_index, min(next_index + self.config.wave_size, limit))]
                next_index += len(wave)
                wave = list(pool.map(self._screen, wave))
                for att in wave:
                    if att.failure is None:
                        self._backstory(att)
                ready = [a for a in wave if a.failure is None]
                list(pool.map(self._assemble, ready))
                for att in wave:
                    done.append(att)
                    if att.profile is not None:
                        produced += 1
                        if produced == count:
                            break
        if produced < count:
            logger.warning("only %d of %d profiles after %d attempts", produced, count, len(done))
        gates = G.GateReport()
        failures: Counter = Counter()
        profiles = []
        for att in done:
            gates.merge(att.gates)
            if att.profile is None:
                failures[att.failure or "unknown"] += 1
                continue
            profiles.append(att.profile.model_copy(update={"profile_id": f"prof-{len(profiles):05d}"}))
        return ProfileBatch(profiles, gates, len(done), failures)
