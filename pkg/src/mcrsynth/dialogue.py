"""Simulation of one multimodal recommendation conversation per profile.

Layout of a conversation:

* an opening block of three turns: the user greets and states the
  situation (attaching a photo of an owned item in multimodal mode), the
  assistant asks what matters, the user states the situation's needs;
* then rounds of one assistant turn and one user turn, either small talk
  (assistant chitchat, user chitchat) or a recommendation (assistant
  recommend, user accept or reject);
* when ``round_limit`` recommendations were rejected, or every retrieved
  candidate has already been tried, the assistant presents the target
  product and the user accepts it.
"""

from __future__ import annotations

import logging
import math
import random
from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from . import prompts as P
from .catalog import Catalog, RankedHit, Retriever, rerank
from .errors import AllCandidatesRejected, McrError
from .gateway import Gateway
from .records import Conversation, Product, Scenario, Turn, UserProfile
from .seeding import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    round_limit: int = 5
    chitchat_p0: float = 0.4
    chitchat_decay: float = 0.6
    multimodal_rate: float = 0.3
    retrieval_k: int = 10
    rerank_m: int | None = None
    outfit_pool: int = 10

    def __post_init__(self) -> None:
        if self.round_limit < 1:
            raise ValueError("round_limit must be >= 1")
        if not 0 <= self.chitchat_p0 <= 1:
            raise ValueError("chitchat_p0 must lie in [0, 1]")
        if not 0 < self.chitchat_decay <= 1:
            raise ValueError("chitchat_decay must lie in (0, 1]")
        if not 0 <= self.multimodal_rate <= 1:
            raise ValueError("multimodal_rate must lie in [0, 1]")
        if self.retrieval_k < 1 or self.outfit_pool < 1:
            raise ValueError("retrieval_k and outfit_pool must be >= 1")
        if self.rerank_m is not None and self.rerank_m < 1:
            raise ValueError("rerank_m must be >= 1")

    @property
    def chitchat_cap(self) -> int:
        """Upper bound on small-talk rounds in one conversation."""
        if self.chitchat_p0 == 0:
            return 0
        if self.chitchat_decay == 1:
            return self.round_limit - 1
        return min(self.round_limit - 1,
                   self.round_limit * math.ceil(self.chitchat_p0 / (1 - self.chitchat_decay)))


def chitchat_probability(round_index: int, config: SimConfig) -> float:
    if round_index < 0:
        raise ValueError("round_index must be >= 0")
    if round_index >= config.round_limit - 1:
        return 0.0
    return config.chitchat_p0 * config.chitchat_decay ** round_index


def next_action(round_index: int, config: SimConfig, rng: random.Random) -> str:
    """Small talk with probability ``p0 * decay**round_index``; from round
    ``round_limit - 1`` onward the assistant always recommends."""
    return "chitchat" if rng.random() < chitchat_probability(round_index, config) else "recommend"


@dataclass
class InterestState:
    interests: list[str] = field(default_factory=list)
    needs: list[str] = field(default_factory=list)
    widened: int = 0

    def query(self) -> str:
        return "; ".join(self.needs or self.interests)


@dataclass
class SimContext:
    """Everything a conversation reads; shared read-only across conversations."""

    gateway: Gateway
    retriever: Retriever
    scenarios: Mapping[str, Scenario]
    config: SimConfig = field(default_factory=SimConfig)

    @property
    def catalog(self) -> Catalog:
        return self.retriever.catalog


class _Seeds:
    """Sequential request seeds within one conversation."""

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self.step = 0

    def __call__(self) -> int:
        self.step += 1
        return derive_seed(self.seed, "step", self.step)


def _view(product: Product) -> dict[str, Any]:
    return {"product_id": product.product_id, "title": product.title,
            "summary": product.summary or product.description}


def _scenario_text(profile: UserProfile, ctx: SimContext) -> str:
    scenario = ctx.scenarios.get(profile.scenario_id)
    return scenario.text if scenario else profile.backstory


class _Builder:
    def __init__(self) -> None:
        self.turns: list[Turn] = []

    def add(self, speaker: str, action: str, text: str, product: Product | None = None,
            images: bool = True, cited: str | None = None) -> Turn:
        turn = Turn(index=len(self.turns), speaker=speaker, action=action, text=text.strip(),
                    product_id=product.product_id if product else None,
                    image_refs=[product.image_ref] if product and images else [],
                    cited_requirement=cited)
        self.turns.append(turn)
        return turn


# ---------------------------------------------------------------------------
# opening


def find_outfit_item(profile: UserProfile, ctx: SimContext, seeds: _Seeds) -> Product | None:
    """Describe an item that would pair with the target, retrieve it and keep
    it only if the compatibility check passes."""
    target = ctx.catalog[profile.target_product_id]
    scenario = _scenario_text(profile, ctx)
    desc = ctx.gateway.complete(P.build_request(P.OUTFIT_DESCRIBE, {
        "scenario": scenario, "product_summary": target.summary or target.description,
    }, images=[target.image_ref], seed=seeds())).text.strip()
    hits = ctx.retriever.search(desc or target.title, ctx.config.outfit_pool,
                                exclude=[target.product_id])
    if not hits:
        return None
    item = ctx.catalog[hits[0].product_id]
    verdict = ctx.gateway.complete_json(P.build_request(P.OUTFIT_COMPAT, {
        "scenario": scenario, "target": _view(target), "owned_item": _view(item),
    }, images=[target.image_ref, item.image_ref], seed=seeds()), {"compatible": bool, "reason": str})
    return item if verdict["compatible"] else None


def open_dialogue(profile: UserProfile, ctx: SimContext, rng: random.Random,
                  seeds: _Seeds) -> tuple[list[Turn], str, Product | None]:
    if not len(ctx.catalog):
        raise ValueError("catalog is empty")
    outfit = None
    if rng.random() < ctx.config.multimodal_rate:
        outfit = find_outfit_item(profile, ctx, seeds)
    mode = "multimodal_open" if outfit else "text_open"
    scenario = _scenario_text(profile, ctx)
    b = _Builder()
    payload: dict[str, Any] = {"scenario": scenario, "backstory": profile.backstory}
    if outfit:
        payload["outfit_item_summary"] = outfit.summary or outfit.description
    text = ctx.gateway.complete(P.build_request(
        P.USER_OPEN, payload, images=[outfit.image_ref] if outfit else [], seed=seeds())).text
    b.add("user", "open", text, outfit)
    text = ctx.gateway.complete(P.build_request(
        P.ASSISTANT_OPEN, {"conversation": P.transcript(b.turns)}, seed=seeds())).text
    b.add("assistant", "open", text)
    text = ctx.gateway.complete(P.build_request(P.USER_NEEDS, {
        "scenario_requirements": profile.scenario_requirements, "conversation": P.transcript(b.turns),
    }, seed=seeds())).text
    b.add("user", "open", text)
    return b.turns, mode, outfit


# ---------------------------------------------------------------------------
# assistant side


def update_interests(context: Sequence[Turn], state: InterestState, gateway: Gateway,
                     seeds: _Seeds) -> None:
    reply = gateway.complete_json(P.build_request(
        P.QUERIER_INTERESTS, {"conversation": P.transcript(context)}, seed=seeds()),
        {"interests": [str]})
    interests = [i.strip() for i in reply["interests"] if i.strip()]
    if interests == state.interests and state.needs:
        return
    state.interests = interests
    reply = gateway.complete_json(P.build_request(
        P.QUERIER_CLARIFY, {"interests": interests}, seed=seeds()), {"needs": [str]})
    state.needs = [n.strip() for n in reply["needs"] if n.strip()]


def querier_step(context: Sequence[Turn], state: InterestState, ctx: SimContext, seeds: _Seeds,
                 excluded: Sequence[str] = ()) -> RankedHit:
    """Refresh interests from the whole context, search with the clarified
    needs and rerank the candidates not yet shown.

    When every top-k hit was already shown the depth doubles once; if that
    still yields nothing new, AllCandidatesRejected is raised.
    """
    if not any(t.speaker == "user" for t in context):
        raise ValueError("querier needs at least one user turn")
    update_interests(context, state, ctx.gateway, seeds)
    query = state.query() or next(t.text for t in reversed(context) if t.speaker == "user")
    banned = set(excluded)
    k = ctx.config.retrieval_k
    candidates = [h for h in ctx.retriever.search(query, k) if h.product_id not in banned]
    if not candidates:
        state.widened += 1
        candidates = [h for h in ctx.retriever.search(query, 2 * k) if h.product_id not in banned]
    if not candidates:
        raise AllCandidatesRejected(f"every candidate up to depth {2 * k} was already shown")
    return rerank(candidates, query, ctx.gateway, ctx.catalog, m=ctx.config.rerank_m, seed=seeds())


def chatter_respond(context: Sequence[Turn], product: Product | None, mode: str,
                    state: InterestState, gateway: Gateway, seeds: _Seeds) -> tuple[str, str]:
    """Assistant message text and its action label."""
    convo = P.transcript(context)
    if mode == "chitchat":
        return gateway.complete(P.build_request(
            P.CHATTER_CHITCHAT, {"conversation": convo}, seed=seeds())).text, "chitchat"
    if product is None:
        raise ValueError(f"{mode} needs a product")
    tag = P.CHATTER_RECOMMEND if mode == "recommend" else P.CHATTER_PROVIDE_TARGET
    text = gateway.complete(P.build_request(tag, {
        "product": _view(product), "needs": state.needs or state.interests, "conversation": convo,
    }, images=[product.image_ref], seed=seeds())).text
    return text, mode


# ---------------------------------------------------------------------------
# user side


def _reaction_validator(requirements: Sequence[str]):
    lowered = {r.lower(): r for r in requirements}

    def check(obj: dict[str, Any]) -> str | None:
        if obj["match"]:
            return None if obj["utterance"].strip() else "utterance is empty"
        cited = obj["violated_requirement"].strip().lower()
        if cited not in lowered:
            return "violated_requirement must be copied exactly from target_requirements"
        if cited not in obj["utterance"].lower():
            return "the utterance must mention the violated requirement"
        return None

    return check


def user_react(profile: UserProfile, product: Product, context: Sequence[Turn], gateway: Gateway,
               seeds: _Seeds) -> tuple[str, str, str | None]:
    """(action, text, cited requirement).  The target product is always accepted."""
    if product.product_id == profile.target_product_id:
        text = gateway.complete(P.build_request(P.USER_ACCEPT, {
            "product": _view(product), "conversation": P.transcript(context),
        }, images=[product.image_ref], seed=seeds())).text
        return "accept", text, None
    obj = gateway.complete_json(P.build_request(P.USER_REACT, {
        "target_requirements": profile.target_requirements, "backstory": profile.backstory,
        "product": _view(product), "conversation": P.transcript(context),
    }, images=[product.image_ref], seed=seeds()),
        {"match": bool, "violated_requirement": str, "utterance": str},
        _reaction_validator(profile.target_requirements))
    if obj["match"]:
        return "accept", obj["utterance"], None
    cited = obj["violated_requirement"].strip().lower()
    canonical = next(r for r in profile.target_requirements if r.lower() == cited)
    return "reject", obj["utterance"], canonical


# ---------------------------------------------------------------------------
# conversation loop


def run_conversation(profile: UserProfile, ctx: SimContext, *, conversation_id: str | None = None,
                     seed: int = 0) -> Conversation:
    """Simulate one conversation.  Any failure yields status ``abandoned``."""
    cid = conversation_id or f"conv-{profile.profile_id}"
    rng = random.Random(derive_seed(seed, "manager"))
    seeds = _Seeds(seed)
    cfg = ctx.config
    b = _Builder()
    mode = "text_open"
    outfit: Product | None = None
    try:
        target = ctx.catalog[profile.target_product_id]
        opening, mode, outfit = open_dialogue(profile, ctx, rng, seeds)
        b.turns.extend(opening)
        state = InterestState()
        shown: list[str] = [outfit.product_id] if outfit else []
        rounds = recommendations = 0
        status = None
        while status is None:
            if recommendations >= cfg.round_limit:
                status = "forced_target"
                break
            action = next_action(rounds, cfg, rng)
            rounds += 1
            if action == "chitchat":
                text, _ = chatter_respond(b.turns, None, "chitchat", state, ctx.gateway, seeds)
                b.add("assistant", "chitchat", text)
                text = ctx.gateway.complete(P.build_request(P.USER_CHITCHAT, {
                    "scenario": _scenario_text(profile, ctx), "conversation": P.transcript(b.turns),
                }, seed=seeds())).text
                b.add("user", "chitchat", text)
                continue
            try:
                hit = querier_step(b.turns, state, ctx, seeds, shown)
            except AllCandidatesRejected as exc:
                logger.info("%s: %s; presenting the target early", cid, exc)
                status = "forced_target"
                break
            product = ctx.catalog[hit.product_id]
            text, _ = chatter_respond(b.turns, product, "recommend", state, ctx.gateway, seeds)
            b.add("assistant", "recommend", text, product)
            shown.append(product.product_id)
            recommendations += 1
            reaction, text, cited = user_react(profile, product, b.turns, ctx.gateway, seeds)
            b.add("user", reaction, text, product, images=False, cited=cited)
            if reaction == "accept":
                status = "accepted"
        if status == "forced_target":
            text, _ = chatter_respond(b.turns, target, "provide_target", state, ctx.gateway, seeds)
            b.add("assistant", "provide_target", text, target)
            _, text, _ = user_react(profile, target, b.turns, ctx.gateway, seeds)
            b.add("user", "accept", text, target, images=False)
    except (McrError, KeyError, ValueError) as exc:
        logger.warning("abandoning %s: %s", cid, exc)
        return Conversation(conversation_id=cid, profile_id=profile.profile_id,
                            target_product_id=profile.target_product_id, open_mode=mode,
                            outfit_item_id=outfit.product_id if outfit else None, turns=b.turns,
                            status="abandoned", abandon_reason=f"{type(exc).__name__}: {exc}")
    return Conversation(conversation_id=cid, profile_id=profile.profile_id,
                        target_product_id=profile.target_product_id, open_mode=mode,
                        outfit_item_id=outfit.product_id if outfit else None, turns=b.turns,
                        status=status)


@dataclass
class SimulationBatch:
    conversations: list[Conversation]
    abandoned: list[Conversation]

    def to_json(self) -> dict[str, Any]:
        kept = self.conversations
        return {
            "conversations": len(kept),
            "abandoned": len(self.abandoned),
            "status": dict(sorted(Counter(c.status for c in kept).items())),
            "open_mode": dict(sorted(Counter(c.open_mode for c in kept).items())),
            "abandon_reasons": dict(sorted(Counter(
                (c.abandon_reason or "").split(":")[0] for c in self.abandoned).items())),
        }


def simulate_batch(profiles: Sequence[UserProfile], ctx: SimContext, *, seed: int = 0,
                   workers: int = 8) -> SimulationBatch:
    """Conversations in profile order; each one's seed derives from its profile id."""

    def one(profile: UserProfile) -> Conversation:
        return run_conversation(profile, ctx, seed=derive_seed(seed, "conversation", profile.profile_id))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, profiles))
    return SimulationBatch([c for c in results if c.status != "abandoned"],
                           [c for c in results if c.status == "abandoned"])


# ---------------------------------------------------------------------------
# structural checks


def check_conversation(conv: Conversation, *, profile: UserProfile | None = None,
                       catalog: Catalog | None = None, config: SimConfig | None = None,
                       require_cited_text: bool = False) -> list[str]:
    """Violations of the turn/conversation invariants; empty when valid."""
    problems: list[str] = []
    turns = conv.turns
    if conv.status == "abandoned":
        problems.append("abandoned conversation in corpus")
    if len(turns) < 5:
        return problems + [f"only {len(turns)} turns"]
    for i, t in enumerate(turns):
        if t.index != i:
            problems.append(f"turn {i}: index {t.index} out of sequence")
        expected = "user" if i % 2 == 0 else "assistant"
        if t.speaker != expected:
            problems.append(f"turn {i}: speaker {t.speaker}, expected {expected}")
    if [t.action for t in turns[:3]] != ["open"] * 3:
        problems.append("opening block must be three open turns")
    if any(t.action == "open" for t in turns[3:]):
        problems.append("open turn after the opening block")

    first = turns[0]
    if conv.open_mode == "multimodal_open":
        if not conv.outfit_item_id:
            problems.append("multimodal_open without outfit_item_id")
        elif first.product_id != conv.outfit_item_id or len(first.image_refs) != 1:
            problems.append("multimodal opening turn must carry the outfit item and its image")
    elif first.image_refs or conv.outfit_item_id:
        problems.append("text_open conversation carries an outfit item")

    recommended: list[str] = []
    for i, t in enumerate(turns):
        product = catalog.get(t.product_id) if catalog is not None and t.product_id else None
        if catalog is not None and t.product_id and product is None:
            problems.append(f"turn {i}: product {t.product_id} not in catalog")
        if t.action in ("recommend", "provide_target"):
            if not t.product_id or len(t.image_refs) != 1:
                problems.append(f"turn {i}: {t.action} must carry a product and its image")
            elif product is not None and t.image_refs != [product.image_ref]:
                problems.append(f"turn {i}: image does not belong to product {t.product_id}")
            if t.action == "recommend":
                recommended.append(t.product_id or "")
        if t.action in ("accept", "reject"):
            prev = turns[i - 1]
            if prev.action not in ("recommend", "provide_target"):
                problems.append(f"turn {i}: {t.action} does not follow a recommendation")
            elif t.product_id != prev.product_id:
                problems.append(f"turn {i}: reacts to a different product than turn {i - 1}")
        if t.action == "chitchat" and (t.product_id or t.image_refs):
            problems.append(f"turn {i}: chitchat carries a product")
        if t.action == "reject":
            if not t.cited_requirement:
                problems.append(f"turn {i}: reject without a cited requirement")
            elif profile is not None and t.cited_requirement not in profile.target_requirements:
                problems.append(f"turn {i}: cited requirement not in the profile")
            elif require_cited_text and t.cited_requirement.lower() not in t.text.lower():
                problems.append(f"turn {i}: reject text does not name its requirement")
    if len(recommended) != len(set(recommended)):
        problems.append("a product was recommended twice")

    accepts = [i for i, t in enumerate(turns) if t.action == "accept"]
    if accepts != [len(turns) - 1]:
        problems.append("conversation must end with its only accept turn")
    else:
        prev = turns[-2]
        if conv.status == "accepted" and prev.action != "recommend":
            problems.append("accepted conversation must end on an accepted recommendation")
        if conv.status == "forced_target":
            if prev.action != "provide_target":
                problems.append("forced_target conversation must end with provide_target")
            if turns[-1].product_id != conv.target_product_id:
                problems.append("forced_target conversation ends on a non-target product")
    if profile is not None:
        if conv.profile_id != profile.profile_id or conv.target_product_id != profile.target_product_id:
            problems.append("conversation does not match its profile")
    if config is not None:
        if len(recommended) > config.round_limit:
            problems.append(f"{len(recommended)} recommendations exceed the round limit")
        chit = sum(1 for t in turns if t.action == "chitchat" and t.speaker == "assistant")
        if chit > config.chitchat_cap:
            problems.append(f"{chit} chitchat rounds exceed the cap {config.chitchat_cap}")
    return problems
