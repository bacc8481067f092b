from __future__ import annotations

import json
import random

import pytest

from mcrsynth import gates as G
from mcrsynth import simagents
from mcrsynth.errors import DedupExhausted, ExpansionStalled, StructuredOutputError
from mcrsynth.evalkit.bleu import BleuDeduper
from mcrsynth.evalkit.text import tokenize
from mcrsynth.gateway import MockBehaviour
from mcrsynth.profiles import (ProfileConfig, ProfileGenerator, assemble_profile, expand_scenarios,
                               generate_backstory, generate_basic_user, screen_triple)
from mcrsynth.records import BasicUserInfo, Scenario

import oracles
from conftest import fixture_gateway, fixture_retriever, make_gateway, product, seed_scenarios

USER = BasicUserInfo(age=34, gender="female", occupation="nurse", notes="likes simple cuts")
SCENE = Scenario(scenario_id="s1", text="A guest is attending a beach wedding in June.")
ITEM = product("P1", "A white linen shirt. Breathable and lightweight.")


def unique_text(rng, n=12):
    return " ".join(f"w{rng.randrange(10**9)}" for _ in range(n))


# -- scenarios -----------------------------------------------------------------

def test_duplicate_of_seed_dropped_disjoint_retained():
    seeds = [Scenario(scenario_id="seed-1", text="A student needs a warm coat for a winter trip.")]
    reply = {"scenarios": ["A student needs a warm coat for a winter trip.",
                           "Runners training for a marathon want breathable gear."]}
    gates = G.GateReport()
    gateway, _ = make_gateway(script={"scenario.expand": [json.dumps(reply)]})
    out = expand_scenarios(seeds, 2, gateway, gates=gates)
    assert [s.text for s in out] == [seeds[0].text, reply["scenarios"][1]]
    assert gates[G.SCENARIO_DEDUP].to_json() == {"generated": 2, "retained": 1, "rejected": 1,
                                                 "pass_rate": 0.5}


def test_thirty_candidates_with_seven_near_copies():
    rng = random.Random(30)
    seeds = [Scenario(scenario_id=f"seed-{i}", text=unique_text(rng)) for i in range(3)]
    candidates = []
    originals = []
    for i in range(30):
        if i in (4, 7, 11, 15, 19, 22, 26):
            base = rng.choice(originals + [s.text for s in seeds]).split()
            base[-1] = "changed"
            candidates.append(" ".join(base))
        else:
            text = unique_text(rng)
            originals.append(text)
            candidates.append(text)
    # independent greedy pass with the oracle BLEU in both directions
    kept = [tokenize(s.text) for s in seeds]
    for text in candidates:
        toks = tokenize(text)
        if all(max(oracles.bleu(toks, [k]), oracles.bleu(k, [toks])) < 0.6 for k in kept):
            kept.append(toks)
    assert len(kept) == 3 + 23
    gates = G.GateReport()
    gateway, _ = make_gateway(script={"scenario.expand": [json.dumps({"scenarios": candidates})]})
    out = expand_scenarios(seeds, len(kept), gateway, gates=gates)
    assert [tokenize(s.text) for s in out] == kept
    assert out[:3] == seeds
    assert gates[G.SCENARIO_DEDUP].rejected == 7 and gates[G.SCENARIO_DEDUP].reconciles()
    assert oracles.max_pairwise_bleu(kept) < 0.6


def test_expansion_stalls_on_duplicates():
    seeds = [Scenario(scenario_id="seed-1", text="A student needs a warm coat for a winter trip.")]
    dup = json.dumps({"scenarios": [seeds[0].text] * 5})
    gateway, _ = make_gateway(script={"scenario.expand": [dup] * 10})
    with pytest.raises(ExpansionStalled):
        expand_scenarios(seeds, 5, gateway, stall_limit=20)


def test_expansion_preconditions():
    gateway, _ = make_gateway()
    with pytest.raises(ValueError):
        expand_scenarios([], 5, gateway)
    with pytest.raises(ValueError):
        expand_scenarios(seed_scenarios(), 5, gateway, tau=1.5)


def test_mock_expansion_from_bundled_seeds():
    seeds = seed_scenarios()
    assert len(seeds) == 12
    gateway, _ = make_gateway(seed=5)
    out = expand_scenarios(seeds, 40, gateway, seed=5)
    assert len(out) == 40 and out[:12] == seeds
    assert len({s.scenario_id for s in out}) == 40
    assert oracles.max_pairwise_bleu([tokenize(s.text) for s in out]) < 0.6


# -- basic users ---------------------------------------------------------------

def test_basic_user_accepted():
    reply = json.dumps({"age": 34, "occupation": "nurse", "gender": "female", "notes": ""})
    gateway, _ = make_gateway(script={"profile.basic_user": [reply]})
    assert generate_basic_user(gateway) == BasicUserInfo(age=34, gender="female", occupation="nurse")


def test_underage_user_regenerated():
    bad = json.dumps({"age": 7, "occupation": "pupil", "gender": "male", "notes": ""})
    good = json.dumps({"age": 40, "occupation": "chef", "gender": "male", "notes": ""})
    gateway, provider = make_gateway(script={"profile.basic_user": [bad, good]})
    assert generate_basic_user(gateway).age == 40 and provider.stats.calls == 2
    gateway, _ = make_gateway(script={"profile.basic_user": [bad] * 5})
    with pytest.raises(StructuredOutputError):
        generate_basic_user(gateway)


def test_hundred_seeded_users_satisfy_invariants():
    gateway, _ = make_gateway(seed=1, behaviour=MockBehaviour(invalid_age_rate=0.3))
    for i in range(100):
        user = generate_basic_user(gateway, seed=i)
        assert 13 <= user.age <= 100 and user.gender and user.occupation


# -- screening -----------------------------------------------------------------

@pytest.mark.parametrize("up, sp, accepted", [(True, True, True), (True, False, False),
                                              (False, True, False), (False, False, False)])
def test_triple_verdicts(up, sp, accepted):
    reply = json.dumps({"user_product_match": up, "scenario_product_match": sp, "rationale": "r"})
    gateway, provider = make_gateway(script={"profile.screen": [reply]})
    verdict = screen_triple(USER, SCENE, ITEM, gateway)
    assert verdict.accepted is accepted and verdict.rationale == "r"
    assert provider.requests[-1].image_refs() == [ITEM.image_ref]


def test_screen_requires_summary():
    bare = ITEM.model_copy(update={"summary": None})
    with pytest.raises(ValueError):
        screen_triple(USER, SCENE, bare, make_gateway()[0])


def test_acceptance_rate_near_configured_probability():
    gateway, _ = make_gateway(seed=9)
    accepted = sum(screen_triple(USER, SCENE, ITEM, gateway, seed=i).accepted for i in range(1000))
    assert 0.186 <= accepted / 1000 <= 0.246


# -- backstories ---------------------------------------------------------------

def test_first_backstory_retained_and_duplicate_retried():
    story = "She is a nurse heading to a beach wedding in June and wants something airy."
    other = "Between hospital shifts she rarely shops, but a seaside ceremony calls for a light top."
    gates = G.GateReport()
    deduper = BleuDeduper(0.6)
    gateway, provider = make_gateway(script={"profile.backstory": [story, story, other]})
    assert generate_backstory(USER, SCENE, ITEM, gateway, deduper, gates=gates) == story
    assert generate_backstory(USER, SCENE, ITEM, gateway, deduper, gates=gates) == other
    assert provider.stats.calls == 3
    assert gates[G.BACKSTORY_DEDUP].to_json()["rejected"] == 1


def test_backstory_dedup_exhausted():
    story = "She is a nurse heading to a beach wedding in June and wants something airy."
    deduper = BleuDeduper(0.6)
    deduper.add(tokenize(story))
    gateway, _ = make_gateway(script={"profile.backstory": [story] * 4})
    with pytest.raises(DedupExhausted):
        generate_backstory(USER, SCENE, ITEM, gateway, deduper, retries=3)


# -- assembly ------------------------------------------------------------------

def test_requirement_list_sizes():
    reply = json.dumps({"scenario_requirements": ["cool in the sun", "smart enough for a wedding",
                                                  "packs easily"],
                        "target_requirements": ["white", "linen", "breathable", "button-down"]})
    gateway, _ = make_gateway(script={"profile.requirements": [reply]})
    profile = assemble_profile("prof-1", USER, SCENE, ITEM, "story", gateway)
    assert len(profile.scenario_requirements) == 3 and len(profile.target_requirements) == 4


def test_empty_target_requirements_rejected():
    reply = json.dumps({"scenario_requirements": ["x"], "target_requirements": []})
    gateway, _ = make_gateway(script={"profile.requirements": [reply] * 3})
    with pytest.raises(StructuredOutputError):
        assemble_profile("prof-1", USER, SCENE, ITEM, "story", gateway)


def test_beach_wedding_guest_profile_structure():
    story = ("Maya is a 34-year-old nurse invited to her college roommate's beach wedding in June. "
             "The ceremony is outdoors at noon, so she wants a breathable linen shirt that looks "
             "polished in photos.")
    reply = json.dumps({"scenario_requirements": ["stays cool in hot sun", "suitable for a wedding"],
                        "target_requirements": ["linen fabric", "light color", "breathable weave"]})
    gateway, _ = make_gateway(script={"profile.backstory": [story], "profile.requirements": [reply]})
    backstory = generate_backstory(USER, SCENE, ITEM, gateway, BleuDeduper(0.6))
    profile = assemble_profile("prof-1", USER, SCENE, ITEM, backstory, gateway)
    data = profile.to_json()
    assert set(data) == {"profile_id", "basic", "scenario_id", "target_product_id", "backstory",
                         "scenario_requirements", "target_requirements"}
    assert data["basic"] == {"age": 34, "gender": "female", "occupation": "nurse",
                             "notes": "likes simple cuts"}
    assert data["scenario_id"] == "s1" and data["target_product_id"] == "P1"
    assert "beach wedding" in data["backstory"]
    assert data["target_requirements"][0] == "linen fabric"


# -- batch generation ----------------------------------------------------------

def _scenarios():
    gateway, _ = make_gateway(seed=3)
    return expand_scenarios(seed_scenarios(), 30, gateway, seed=3)


def test_profile_batch_properties():
    scenarios = _scenarios()
    retriever = fixture_retriever()
    accepted_triples = set()

    def screen(call):
        reply = simagents.screen_triple(call)
        obj = json.loads(reply[reply.index("{"):reply.rindex("}") + 1])
        if obj["user_product_match"] and obj["scenario_product_match"]:
            p = call.payload
            accepted_triples.add((json.dumps(p["user"], sort_keys=True), p["scenario"],
                                  p["product"]["product_id"]))
        return reply

    def backstory(call):
        p = call.payload
        key = (json.dumps(p["user"], sort_keys=True), p["scenario"])
        assert any(t[:2] == key for t in accepted_triples), "backstory requested for an unscreened triple"
        return simagents.backstory(call)

    gateway, _ = fixture_gateway(seed=4, fallbacks={"profile.screen": screen, "profile.backstory": backstory})
    batch = ProfileGenerator(gateway, retriever, scenarios, ProfileConfig(count=15), seed=4).generate()
    assert len(batch.profiles) == 15
    assert [p.profile_id for p in batch.profiles] == [f"prof-{i:05d}" for i in range(15)]
    by_id = {s.scenario_id for s in scenarios}
    for p in batch.profiles:
        assert p.scenario_id in by_id and p.target_product_id in retriever.catalog
        assert p.scenario_requirements and p.target_requirements
    assert oracles.max_pairwise_bleu([tokenize(p.backstory) for p in batch.profiles]) < 0.6
    for name, count in batch.gates.items():
        assert count.reconciles(), name
    triple = batch.gates[G.TRIPLE_RATIONALITY]
    assert triple.retained >= 15 and triple.generated == batch.attempts


def test_profile_generation_independent_of_workers():
    scenarios = _scenarios()
    runs = []
    for workers in (1, 8):
        gateway, _ = fixture_gateway(seed=6)
        batch = ProfileGenerator(gateway, fixture_retriever(), scenarios, ProfileConfig(count=8, wave_size=5),
                                 seed=6, workers=workers).generate()
        runs.append(([p.to_json() for p in batch.profiles], batch.gates.to_json()))
    assert runs[0] == runs[1]


def test_profile_generation_gives_up_after_attempt_limit():
    reject = json.dumps({"user_product_match": False, "scenario_product_match": True, "rationale": "no"})
    gateway, _ = fixture_gateway(fallbacks={"profile.screen": lambda call: reject})
    batch = ProfileGenerator(gateway, fixture_retriever(), seed_scenarios(),
                             ProfileConfig(count=2, max_attempts_per_profile=5)).generate()
    assert batch.profiles == [] and batch.attempts == 10
    assert batch.failures == {"triple_rejected": 10}
