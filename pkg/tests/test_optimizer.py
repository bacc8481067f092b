from __future__ import annotations

import json
import random

import pytest

from mcrsynth import gates as G
from mcrsynth import prompts as P
from mcrsynth.errors import TransientProviderError
from mcrsynth.evalkit.text import distinct_n, tokenize
from mcrsynth.gateway.payload import payload_of
from mcrsynth.optimizer import filter_corpus, optimize_batch, review, rewrite
from mcrsynth.records import ReviewScore

import oracles
from conftest import conversation, make_gateway


def conv(cid="c1"):
    return conversation(cid, ["P001", "P002", "P003"])


def review_reply(c, l, u):
    return json.dumps({"content_quality": c, "logical_fluency": l, "user_consistency": u, "reason": "ok"})


def marked_rewrite(call):
    return "Reworded: " + call.payload["text"]


# -- rewrite -------------------------------------------------------------------

def test_inconsistent_turn_reverts_others_rewritten():
    c = conv()
    c = c.model_copy(update={"turns": [t.model_copy(update={"text": f"{t.text} ({t.index})"}) for t in c.turns]})
    third = c.turns[3].text

    def supervise(call):
        ok = call.payload["original"] != third
        return json.dumps({"consistent": ok, "reason": "x"})

    gateway, _ = make_gateway(fallbacks={"rewriter.rewrite": marked_rewrite, "rewriter.supervise": supervise})
    result = rewrite(c, gateway)
    for i, (before, after) in enumerate(zip(c.turns, result.rewritten.turns)):
        if i == 3:
            assert after.text == before.text
        else:
            assert after.text == "Reworded: " + before.text
    assert result.turn_verdicts[3] is False and sum(result.turn_verdicts) == len(c.turns) - 1
    assert result.consistency_verdict is False


def test_every_turn_failing_equals_original():
    c = conv()
    gateway, _ = make_gateway(fallbacks={
        "rewriter.rewrite": marked_rewrite,
        "rewriter.supervise": lambda call: json.dumps({"consistent": False, "reason": "changed"})})
    result = rewrite(c, gateway)
    assert json.dumps(result.rewritten.to_json()) == json.dumps(c.to_json())


def test_colloquial_instruction_probability():
    gateway, provider = make_gateway()
    for i in range(20):
        rewrite(conv(f"c{i}"), gateway, colloquial_prob=0.0, seed=i)
    prompts = [r.messages[-1].text_content for r in provider.requests if r.tag == P.REWRITE]
    assert prompts and not any(P.COLLOQUIAL_INSTRUCTION in t for t in prompts)
    gateway, provider = make_gateway()
    flags = [rewrite(conv(f"c{i}"), gateway, colloquial_prob=1.0, seed=i).colloquial for i in range(5)]
    assert all(flags)
    prompts = [r.messages[-1].text_content for r in provider.requests if r.tag == P.REWRITE]
    assert all(P.COLLOQUIAL_INSTRUCTION in t for t in prompts)
    with pytest.raises(ValueError):
        rewrite(conv(), gateway, colloquial_prob=2.0)


def test_rewrite_and_supervision_temperatures():
    gateway, provider = make_gateway()
    rewrite(conv(), gateway, seed=3)
    temps = {r.tag: r.temperature for r in provider.requests}
    assert temps[P.REWRITE] == P.REWRITE_TEMPERATURE
    assert temps[P.SUPERVISE] == P.SUPERVISION_TEMPERATURE < P.REWRITE_TEMPERATURE


def test_gateway_error_keeps_original():
    c = conv()
    gateway, provider = make_gateway()
    provider.fail_next(*(TransientProviderError("503") for _ in range(3)))
    result = rewrite(c, gateway)
    assert result.rewritten == c and result.error and result.turn_verdicts == []


def test_projection_unchanged_with_default_mock():
    gateway, _ = make_gateway(seed=2)
    for i in range(30):
        c = conv(f"c{i}")
        result = rewrite(c, gateway, seed=i)
        assert result.rewritten.projection() == c.projection()
        for before, after, ok in zip(c.turns, result.rewritten.turns, result.turn_verdicts):
            if not ok:
                assert after.text == before.text


def test_perturbing_rewriter_raises_distinct4():
    rng = random.Random(0)
    phrases = ["This looks great and I really need it.", "Thanks, that is a nice choice.",
               "I love it, it fits what I am looking for.", "Really great, I will take it, thanks!"]
    corpus = []
    for i in range(20):
        c = conv(f"c{i}")
        turns = [t.model_copy(update={"text": rng.choice(phrases)}) for t in c.turns]
        corpus.append(c.model_copy(update={"turns": turns}))
    gateway, _ = make_gateway(seed=1)
    rewritten = [rewrite(c, gateway, seed=i).rewritten for i, c in enumerate(corpus)]
    before = [tokenize(t.text) for c in corpus for t in c.turns]
    after = [tokenize(t.text) for c in rewritten for t in c.turns]
    assert oracles.distinct(after, 4)[0] > oracles.distinct(before, 4)[0]
    assert distinct_n(after, 4) > distinct_n(before, 4)


# -- review --------------------------------------------------------------------

@pytest.mark.parametrize("scores, total, passed", [((2, 2, 2), 6, True), ((2, 1, 1), 4, False),
                                                   ((2, 2, 1), 5, True)])
def test_review_scores(scores, total, passed):
    gateway, provider = make_gateway(script={"reviewer.review": [review_reply(*scores)]})
    score = review(conv(), gateway, 5)
    assert (score.total, score.passed) == (total, passed)
    assert score.to_json()["pass"] is passed
    assert provider.requests[-1].temperature == P.SUPERVISION_TEMPERATURE


def test_review_fails_closed():
    bad = json.dumps({"content_quality": 9, "logical_fluency": 2, "user_consistency": 2, "reason": ""})
    gateway, _ = make_gateway(script={"reviewer.review": [bad] * 3})
    score = review(conv(), gateway)
    assert score.passed is False and score.total == 0 and "failed" in score.reason


def test_review_score_invariants():
    with pytest.raises(ValueError):
        ReviewScore(content_quality=2, logical_fluency=2, user_consistency=2, total=5, threshold=5,
                    passed=True)
    with pytest.raises(ValueError):
        ReviewScore(content_quality=1, logical_fluency=1, user_consistency=1, total=3, threshold=5,
                    passed=True)


def test_review_sees_profile():
    from mcrsynth.records import BasicUserInfo, UserProfile
    profile = UserProfile(profile_id="prof-c1", basic=BasicUserInfo(age=20, gender="f", occupation="x"),
                          scenario_id="s", target_product_id="P003", backstory="story",
                          scenario_requirements=["a"], target_requirements=["b"])
    gateway, provider = make_gateway()
    review(conv(), gateway, profile=profile)
    assert payload_of(provider.requests[-1])["profile"]["backstory"] == "story"


def test_hundred_scripted_reviews_pass_count():
    rng = random.Random(5)
    table = [(rng.randint(0, 2), rng.randint(0, 2), rng.randint(0, 2)) for _ in range(100)]
    expected = 0
    for c, l, u in table:
        if c + l + u >= 5:
            expected += 1
    gateway, _ = make_gateway(script={"reviewer.review": [review_reply(*row) for row in table]})
    batch = optimize_batch([conv(f"c{i:03d}") for i in range(100)], gateway, rewrite_enabled=False,
                           workers=1)
    assert len(batch.retained) == expected
    assert batch.gates[G.CONVERSATION_REVIEW].to_json()["retained"] == expected


# -- filtering -----------------------------------------------------------------

def scored(cid, total_parts, threshold=5):
    return conv(cid).model_copy(update={"review": ReviewScore.from_scores(*total_parts, threshold)})


def test_filter_all_pass_and_none_pass():
    everything = [scored(f"c{i}", (2, 2, 2)) for i in range(5)]
    kept, report = filter_corpus(everything)
    assert kept == everything and report["conversation_review"]["rejected"] == 0
    nothing = [scored(f"c{i}", (1, 1, 1)) for i in range(5)]
    kept, report = filter_corpus(nothing)
    assert kept == [] and report["conversation_review"] == {"generated": 5, "retained": 0, "rejected": 5,
                                                            "pass_rate": 0.0}


def test_filter_matches_predicate_oracle():
    rng = random.Random(2)
    batch = []
    for i in range(60):
        if rng.random() < 0.1:
            batch.append(conv(f"c{i}"))  # never reviewed
        else:
            batch.append(scored(f"c{i}", (rng.randint(0, 2), rng.randint(0, 2), rng.randint(0, 2))))
    kept, _ = filter_corpus(batch, 5)
    oracle = []
    for c in batch:
        if c.review is not None and c.review.content_quality + c.review.logical_fluency + \
                c.review.user_consistency >= 5:
            oracle.append(c.conversation_id)
    assert [c.conversation_id for c in kept] == oracle


def test_filter_records_into_existing_report():
    gates = G.GateReport()
    gates.record(G.SCENARIO_DEDUP, True, 3)
    _, report = filter_corpus([scored("a", (2, 2, 2))], gates=gates)
    assert list(report) == [G.SCENARIO_DEDUP, G.CONVERSATION_REVIEW]


# -- batch ---------------------------------------------------------------------

def test_optimize_batch_deterministic_and_reconciled():
    corpus = [conv(f"c{i}") for i in range(15)]
    outputs = []
    for workers in (1, 6):
        gateway, _ = make_gateway(seed=7)
        batch = optimize_batch(corpus, gateway, seed=7, workers=workers)
        outputs.append(json.dumps([c.to_json() for c in batch.reviewed]))
        for name, count in batch.gates.items():
            assert count.reconciles(), name
        assert batch.gates[G.REWRITE_CONSISTENCY].generated == sum(len(c.turns) for c in corpus)
        assert all(c.review and c.review.passed for c in batch.retained)
    assert outputs[0] == outputs[1]
