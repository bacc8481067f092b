from __future__ import annotations

import json
import random
from functools import lru_cache

import pytest

from mcrsynth.catalog import Catalog
from mcrsynth.dialogue import (InterestState, SimConfig, SimContext, _Seeds, chatter_respond,
                               check_conversation, chitchat_probability, next_action, open_dialogue,
                               querier_step, run_conversation, simulate_batch, user_react)
from mcrsynth.errors import AllCandidatesRejected, AuthError
from mcrsynth.gateway import MockBehaviour
from mcrsynth.profiles import ProfileConfig, ProfileGenerator, expand_scenarios
from mcrsynth.records import BasicUserInfo, Scenario, Turn, UserProfile

from conftest import fixture_gateway, fixture_retriever, make_gateway, product, retriever_for, seed_scenarios


@lru_cache(maxsize=1)
def _profiles_and_scenarios():
    gateway, _ = make_gateway(seed=21)
    scenarios = expand_scenarios(seed_scenarios(), 30, gateway, seed=21)
    gateway, _ = fixture_gateway(seed=21)
    batch = ProfileGenerator(gateway, fixture_retriever(), scenarios, ProfileConfig(count=50), seed=21).generate()
    return tuple(batch.profiles), {s.scenario_id: s for s in scenarios}


def profiles(n):
    return list(_profiles_and_scenarios()[0][:n])


def context(config=None, seed=0, retriever=None, **mock):
    gateway, provider = fixture_gateway(seed=seed, **mock)
    return SimContext(gateway, retriever or fixture_retriever(), _profiles_and_scenarios()[1],
                      config or SimConfig()), provider


def user_turn(text):
    return Turn(index=0, speaker="user", action="open", text=text)


# -- action control ------------------------------------------------------------

def test_no_chitchat_when_p0_zero():
    rng = random.Random(0)
    config = SimConfig(chitchat_p0=0.0)
    assert all(next_action(r % 4, config, rng) == "recommend" for r in range(200))


def test_chitchat_probability_formula():
    config = SimConfig(round_limit=5, chitchat_p0=0.5, chitchat_decay=0.5)
    assert chitchat_probability(2, config) == 0.125
    assert chitchat_probability(4, config) == 0.0  # final round before the limit
    with pytest.raises(ValueError):
        chitchat_probability(-1, config)


def test_monte_carlo_chitchat_rate():
    config = SimConfig(round_limit=5, chitchat_p0=0.4, chitchat_decay=0.8)
    rng = random.Random(42)
    rate = sum(next_action(1, config, rng) == "chitchat" for _ in range(10_000)) / 10_000
    assert abs(rate - 0.32) <= 0.02


def test_chitchat_cap():
    assert SimConfig(round_limit=5, chitchat_p0=0.4, chitchat_decay=0.6).chitchat_cap == 4
    assert SimConfig(round_limit=5, chitchat_p0=0.0).chitchat_cap == 0
    assert SimConfig(round_limit=1).chitchat_cap == 0


@pytest.mark.parametrize("kwargs", [{"round_limit": 0}, {"chitchat_p0": 1.5}, {"chitchat_decay": 0},
                                    {"multimodal_rate": -0.1}, {"retrieval_k": 0}, {"rerank_m": 0}])
def test_sim_config_ranges(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


# -- opening -------------------------------------------------------------------

def test_failed_compatibility_falls_back_to_text_open():
    ctx, _ = context(SimConfig(multimodal_rate=1.0), behaviour=MockBehaviour(outfit_compat=0.0))
    turns, mode, outfit = open_dialogue(profiles(1)[0], ctx, random.Random(0), _Seeds(0))
    assert mode == "text_open" and outfit is None
    assert [t.action for t in turns] == ["open"] * 3 and turns[0].image_refs == []


def test_passed_compatibility_attaches_outfit_image():
    ctx, provider = context(SimConfig(multimodal_rate=1.0), behaviour=MockBehaviour(outfit_compat=1.0))
    profile = profiles(1)[0]
    turns, mode, outfit = open_dialogue(profile, ctx, random.Random(0), _Seeds(0))
    assert mode == "multimodal_open" and outfit.product_id != profile.target_product_id
    assert turns[0].image_refs == [outfit.image_ref] and turns[0].product_id == outfit.product_id
    tags = [r.tag for r in provider.requests]
    assert tags[:3] == ["dialogue.outfit_describe", "dialogue.outfit_compat", "dialogue.user_open"]


def test_zero_multimodal_rate_skips_outfit_flow():
    ctx, provider = context(SimConfig(multimodal_rate=0.0))
    open_dialogue(profiles(1)[0], ctx, random.Random(0), _Seeds(0))
    assert "dialogue.outfit_describe" not in [r.tag for r in provider.requests]


def test_multimodal_fraction_near_compat_rate():
    ctx, _ = context(SimConfig(multimodal_rate=1.0), seed=8)
    profile = profiles(1)[0]
    hits = sum(open_dialogue(profile, ctx, random.Random(i), _Seeds(i))[1] == "multimodal_open"
               for i in range(1000))
    assert 0.43 <= hits / 1000 <= 0.51


# -- querier -------------------------------------------------------------------

FIVE = [product("Q1", "navy wool coat with a belt."), product("Q2", "red silk dress for evening parties."),
        product("Q3", "white linen shirt, breathable and light."), product("Q4", "black leather boots."),
        product("Q5", "grey cotton hoodie with a zip.")]


def five_ctx(k=10, **mock):
    retriever = retriever_for(FIVE)
    return context(SimConfig(retrieval_k=k, rerank_m=1), retriever=retriever, **mock)


def test_need_matching_one_summary_returns_it():
    for p in FIVE:
        script = {"querier.interests": [json.dumps({"interests": ["something"]})],
                  "querier.clarify": [json.dumps({"needs": [p.summary]})]}
        ctx, _ = five_ctx(script=script)
        state = InterestState()
        hit = querier_step([user_turn("hi")], state, ctx, _Seeds(0))
        assert hit.product_id == p.product_id and hit.score == pytest.approx(1.0)
        assert state.needs == [p.summary]


def test_search_depth_doubles_once_when_all_shown():
    script = {"querier.clarify": [json.dumps({"needs": ["white linen shirt"]})] * 2}
    ctx, _ = five_ctx(k=2, script=script)
    top = [h.product_id for h in ctx.retriever.search("white linen shirt", 5)]
    state = InterestState()
    hit = querier_step([user_turn("hi")], state, ctx, _Seeds(0), excluded=top[:2])
    assert state.widened == 1 and hit.product_id in top[2:4]
    with pytest.raises(AllCandidatesRejected):
        querier_step([user_turn("hi")], InterestState(), ctx, _Seeds(0), excluded=top[:4])


def test_unchanged_clarification_still_searches():
    script = {"querier.interests": [json.dumps({"interests": ["red silk dress"]})],
              "querier.clarify": [json.dumps({"needs": ["red silk dress"]})]}
    ctx, _ = five_ctx(script=script)
    hit = querier_step([user_turn("hi")], InterestState(), ctx, _Seeds(0))
    assert hit.product_id == "Q2" and ctx.retriever.stats["searches"] == 1


def test_querier_needs_a_user_turn():
    ctx, _ = five_ctx()
    with pytest.raises(ValueError):
        querier_step([], InterestState(), ctx, _Seeds(0))


def test_clarification_refreshed_only_when_interests_change():
    script = {"querier.interests": [json.dumps({"interests": ["a"]})] * 2 + [json.dumps({"interests": ["b"]})]}
    ctx, provider = five_ctx(script=script)
    state = InterestState()
    for _ in range(3):
        querier_step([user_turn("hi")], state, ctx, _Seeds(0))
    assert [r.tag for r in provider.requests].count("querier.clarify") == 2


# -- chatter -------------------------------------------------------------------

def test_recommend_turn_shape():
    text = ("For a beach wedding, this white linen shirt keeps you cool, and the light color you see "
            "in the photo matches the breezy look you wanted.")
    ctx, provider = five_ctx(script={"chatter.recommend": [text]})
    out, action = chatter_respond([user_turn("hi")], FIVE[2], "recommend", InterestState(), ctx.gateway,
                                  _Seeds(0))
    assert (out, action) == (text, "recommend")
    assert provider.requests[-1].image_refs() == [FIVE[2].image_ref]


def test_chitchat_has_no_product():
    ctx, provider = five_ctx()
    _, action = chatter_respond([user_turn("hi")], None, "chitchat", InterestState(), ctx.gateway, _Seeds(0))
    assert action == "chitchat" and provider.requests[-1].image_refs() == []
    with pytest.raises(ValueError):
        chatter_respond([user_turn("hi")], None, "recommend", InterestState(), ctx.gateway, _Seeds(0))


# -- user simulator ------------------------------------------------------------

PROFILE = UserProfile(profile_id="p1", basic=BasicUserInfo(age=30, gender="male", occupation="chef"),
                      scenario_id="seed-01", target_product_id="Q3", backstory="He needs a shirt.",
                      scenario_requirements=["stay cool"], target_requirements=["white color", "linen"])


def test_target_is_always_accepted():
    gateway, provider = make_gateway(behaviour=MockBehaviour(user_accept=0.0))
    action, _, cited = user_react(PROFILE, FIVE[2], [user_turn("hi")], gateway, _Seeds(0))
    assert action == "accept" and cited is None
    assert provider.requests[-1].tag == "user.accept"


def test_color_mismatch_rejected_with_citation():
    reply = json.dumps({"match": False, "violated_requirement": "White color",
                        "utterance": "Nice, but I really need a white color."})
    gateway, _ = make_gateway(script={"user.react": [reply]})
    action, text, cited = user_react(PROFILE, FIVE[0], [user_turn("hi")], gateway, _Seeds(0))
    assert action == "reject" and cited == "white color" and "white color" in text


def test_citation_outside_profile_is_reasked():
    bad = json.dumps({"match": False, "violated_requirement": "cheap", "utterance": "too cheap"})
    good = json.dumps({"match": False, "violated_requirement": "linen", "utterance": "I wanted linen."})
    gateway, provider = make_gateway(script={"user.react": [bad, good]})
    assert user_react(PROFILE, FIVE[0], [user_turn("hi")], gateway, _Seeds(0))[2] == "linen"
    assert provider.stats.calls == 2


def test_fifty_profile_citation_audit():
    ctx, _ = context(seed=5)
    batch = simulate_batch(profiles(50), ctx, seed=5)
    by_id = {p.profile_id: p for p in profiles(50)}
    rejects = 0
    for conv in batch.conversations:
        for t in conv.turns:
            if t.action == "reject":
                rejects += 1
                assert t.cited_requirement in by_id[conv.profile_id].target_requirements
                assert t.cited_requirement.lower() in t.text.lower()
    assert rejects > 20


# -- whole conversations -------------------------------------------------------

def test_round_limit_one_with_rejecting_user():
    ctx, _ = context(SimConfig(round_limit=1, multimodal_rate=0), behaviour=MockBehaviour(user_accept=0.0))
    profile = next(p for p in profiles(50))
    conv = run_conversation(profile, ctx, seed=1)
    actions = [t.action for t in conv.turns]
    if conv.status == "accepted":  # the one recommendation happened to be the target
        assert actions[3:] == ["recommend", "accept"]
        assert conv.turns[-1].product_id == profile.target_product_id
    else:
        assert conv.status == "forced_target"
        assert actions[3:] == ["recommend", "reject", "provide_target", "accept"]
        assert conv.turns[-1].product_id == profile.target_product_id


def test_accepting_user_ends_after_one_round():
    ctx, _ = context(SimConfig(chitchat_p0=0.0), behaviour=MockBehaviour(user_accept=1.0))
    for profile in profiles(5):
        conv = run_conversation(profile, ctx, seed=2)
        assert conv.status == "accepted"
        assert [t.action for t in conv.turns][3:] == ["recommend", "accept"]


def test_twenty_profile_batch_invariants():
    config = SimConfig()
    ctx, _ = context(config, seed=3)
    by_id = {p.profile_id: p for p in profiles(20)}
    batch = simulate_batch(profiles(20), ctx, seed=3)
    assert len(batch.conversations) == 20 and not batch.abandoned
    for conv in batch.conversations:
        assert check_conversation(conv, profile=by_id[conv.profile_id], catalog=ctx.catalog,
                                  config=config, require_cited_text=True) == []


def test_missing_target_abandons():
    ctx, _ = context()
    orphan = PROFILE.model_copy(update={"target_product_id": "NOPE"})
    conv = run_conversation(orphan, ctx)
    assert conv.status == "abandoned" and conv.abandon_reason.startswith("KeyError")


def test_gateway_error_abandons():
    ctx, provider = context()
    provider.fail_next(AuthError("revoked"))
    conv = run_conversation(profiles(1)[0], ctx)
    assert conv.status == "abandoned" and "AuthError" in conv.abandon_reason
    batch = simulate_batch(profiles(3), ctx)
    assert batch.to_json()["conversations"] + batch.to_json()["abandoned"] == 3


def test_seeded_determinism_and_worker_independence():
    outputs = []
    for workers in (1, 8, 8):
        ctx, _ = context(seed=4)
        batch = simulate_batch(profiles(12), ctx, seed=4, workers=workers)
        outputs.append(json.dumps([c.to_json() for c in batch.conversations]))
    assert outputs[0] == outputs[1] == outputs[2]


# -- structural checker --------------------------------------------------------

def test_checker_flags_violations():
    ctx, _ = context(seed=6)
    profile = profiles(1)[0]
    conv = run_conversation(profile, ctx, seed=6)
    assert check_conversation(conv, profile=profile, catalog=ctx.catalog) == []
    rec = next(i for i, t in enumerate(conv.turns) if t.action in ("recommend", "provide_target"))
    broken = conv.model_copy(deep=True)
    broken.turns[rec].image_refs = []
    assert any("image" in p for p in check_conversation(broken))
    swapped = conv.model_copy(deep=True)
    swapped.turns[0].speaker = "assistant"
    assert any("speaker" in p for p in check_conversation(swapped))
    stray = conv.model_copy(update={"outfit_item_id": "P001"})
    assert any("outfit" in p for p in check_conversation(stray))
    other_catalog = Catalog([])
    assert any("not in catalog" in p for p in check_conversation(conv, catalog=other_catalog))
