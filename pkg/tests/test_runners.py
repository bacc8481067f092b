from __future__ import annotations

import json
import random

import pytest

from mcrsynth.evalkit.runners import (JUDGE_DIMENSIONS, evaluation_points, judge_conversations,
                                      load_responses, pair_responses, rec_eval_run, response_metrics)
from mcrsynth.errors import EmptyInput, EmptyRecords
from mcrsynth.gateway.payload import payload_of
from mcrsynth import vocab

import oracles
from conftest import conversation, make_gateway, product, retriever_for


def fixture_products(n=100, seed=0):
    rng = random.Random(seed)
    garments = list(vocab.GARMENTS)
    out = []
    for i in range(n):
        words = [rng.choice(vocab.COLORS), rng.choice(vocab.MATERIALS), rng.choice(vocab.STYLES),
                 rng.choice(garments), f"code{i}"]
        out.append(product(f"P{i:03d}", " ".join(words) + "."))
    return out


def asked_product(call):
    turns = call.payload["conversation"]
    return turns[-1]["text"].split()[-1]


# -- evaluation points ---------------------------------------------------------

def test_evaluation_points():
    conv = conversation("c1", ["P001", "P002"])
    assert evaluation_points(conv) == [3, 5]
    assert evaluation_points(conv, "final") == [5]
    with pytest.raises(ValueError):
        evaluation_points(conv, "every")


def test_context_excludes_the_evaluated_turn():
    products = fixture_products(20)
    retriever = retriever_for(products)
    gateway, provider = make_gateway()
    rec_eval_run([conversation("c1", ["P003"])], gateway, retriever, workers=1)
    context = payload_of(provider.requests[-1])["conversation"]
    assert len(context) == 3 and context[-1]["text"] == "please find P003"
    # images of the evaluated turn must not leak into the query prompt
    assert provider.requests[-1].image_refs() == []


# -- recall / MRR runs ---------------------------------------------------------

def test_exact_summary_query_gives_full_recall():
    products = fixture_products()
    by_id = {p.product_id: p.summary for p in products}
    retriever = retriever_for(products)
    gateway, _ = make_gateway(fallbacks={"eval.rec_query": lambda call: by_id[asked_product(call)]})
    corpus = [conversation(f"c{i}", [f"P{i:03d}", f"P{99 - i:03d}"]) for i in range(10)]
    result = rec_eval_run(corpus, gateway, retriever)
    assert result.metrics["recall@10"] == 1.0 and result.metrics["mrr@10"] == 1.0
    assert len(result.records) == 20 and result.skipped == 0


def test_unrelated_query_gives_near_zero_recall():
    products = fixture_products()
    retriever = retriever_for(products)
    gateway, _ = make_gateway(fallbacks={"eval.rec_query": lambda call: "quantum chromodynamics lecture"})
    corpus = [conversation(f"c{i}", [f"P{i * 3:03d}"]) for i in range(30)]
    result = rec_eval_run(corpus, gateway, retriever)
    # a constant query returns one fixed list, so at most ten golds can sit in its top ten
    assert result.metrics["recall@10"] <= 10 / 30


def test_intermediate_fidelity_matches_recomputation():
    products = fixture_products()
    by_id = {p.product_id: p.summary for p in products}

    def noisy(call):
        gold = asked_product(call)
        words = by_id[gold].split()
        keep = [w for w in words if call.rng.random() < 0.5] or ["shirt"]
        return " ".join(keep)

    retriever = retriever_for(products)
    gateway, _ = make_gateway(seed=2, fallbacks={"eval.rec_query": noisy})
    rng = random.Random(0)
    corpus = [conversation(f"c{i}", [f"P{rng.randrange(100):03d}" for _ in range(3)]) for i in range(40)]
    result = rec_eval_run(corpus, gateway, retriever, n_values=(10, 20))
    rows = [(r.gold_product_id, r.candidates) for r in result.records]
    for n in (10, 20):
        want = oracles.recall_mrr(rows, n)
        assert abs(result.metrics[f"recall@{n}"] - want[0]) <= 1e-9
        assert abs(result.metrics[f"mrr@{n}"] - want[1]) <= 1e-9
    assert 0 < result.metrics["recall@10"] < 1
    assert result.metrics["recall@10"] <= result.metrics["recall@20"]
    # the stored lists are exactly the exhaustive scan for the generated query
    store = retriever.store
    for record in result.records[:10]:
        q = retriever.embedder.embed([record.query])[0]
        assert record.candidates == oracles.cosine_topk(store.ids, store.vectors.tolist(), list(q), 20)


def test_gateway_errors_skip_records():
    from mcrsynth.errors import AuthError
    products = fixture_products(20)
    gateway, provider = make_gateway()
    provider.fail_next(AuthError("nope"))
    result = rec_eval_run([conversation("c1", ["P001", "P002"])], gateway, retriever_for(products),
                          workers=1)
    assert result.skipped == 1 and len(result.records) == 1
    provider.fail_next(AuthError("nope"))
    with pytest.raises(EmptyRecords):
        rec_eval_run([conversation("c2", ["P001"])], gateway, retriever_for(products))


# -- judge ---------------------------------------------------------------------

def scores(*values):
    return json.dumps(dict(zip(JUDGE_DIMENSIONS, values)))


def test_judge_all_twos():
    gateway, _ = make_gateway(script={"eval.judge": [scores(2, 2, 2, 2, 2)] * 6})
    report = judge_conversations([conversation("a", ["P001"]), conversation("b", ["P002"])], gateway,
                                 rounds=3)
    assert report.means == {k: 2.0 for k in JUDGE_DIMENSIONS} and report.scored == 2


def test_judge_mixed_scores_single_round():
    replies = [scores(2, 1, 0, 2, 1), scores(0, 1, 2, 2, 2)]
    gateway, _ = make_gateway(script={"eval.judge": replies})
    report = judge_conversations([conversation("a", ["P001"]), conversation("b", ["P002"])], gateway,
                                 rounds=1, workers=1)
    assert report.means == {"natural": 1.0, "logical": 1.0, "informative": 1.0, "pc_correlation": 2.0,
                            "it_correspondence": 1.5}


def test_judge_round_average_oracle():
    rng = random.Random(3)
    convs = [conversation(f"c{i}", ["P001"]) for i in range(4)]
    table = [[[rng.randint(0, 2) for _ in JUDGE_DIMENSIONS] for _ in range(3)] for _ in convs]
    replies = [scores(*row) for conv_rows in table for row in conv_rows]
    gateway, _ = make_gateway(script={"eval.judge": replies})
    report = judge_conversations(convs, gateway, rounds=3, workers=1)
    for ci, conv in enumerate(convs):
        for di, dim in enumerate(JUDGE_DIMENSIONS):
            total = 0
            for r in range(3):
                total += table[ci][r][di]
            assert report.per_conversation[conv.conversation_id][dim] == pytest.approx(total / 3)
    for di, dim in enumerate(JUDGE_DIMENSIONS):
        flat = [table[ci][r][di] for ci in range(4) for r in range(3)]
        assert report.means[dim] == pytest.approx(sum(flat) / len(flat))


def test_judge_excludes_unparseable():
    bad = json.dumps({"natural": 5})
    gateway, _ = make_gateway(script={"eval.judge": [scores(2, 2, 2, 2, 2), bad, bad, bad]})
    report = judge_conversations([conversation("a", ["P001"]), conversation("b", ["P002"])], gateway,
                                 rounds=1, workers=1)
    assert report.scored == 1 and report.excluded == 1 and list(report.per_conversation) == ["a"]
    with pytest.raises(EmptyInput):
        judge_conversations([], gateway)


def test_judge_with_default_mock_is_in_range():
    gateway, _ = make_gateway(seed=4)
    report = judge_conversations([conversation(f"c{i}", ["P001"]) for i in range(5)], gateway)
    assert report.scored == 5
    assert all(1 <= v <= 2 for v in report.means.values())


# -- response metrics ----------------------------------------------------------

def test_response_metrics_identity():
    texts = ["the navy linen shirt is breathable", "these loafers are comfortable all day"]
    m = response_metrics(texts, texts)
    assert m["bleu4"] == pytest.approx(1.0) and m["rouge1"] == 1.0 and m["rougeL"] == 1.0
    assert m["distinct4"] == 1.0 and m["avg_words"] == 6.0 and m["count"] == 2


def test_response_metrics_match_oracles():
    rng = random.Random(12)
    vocab_words = "a b c d e f g".split()
    preds = [" ".join(rng.choice(vocab_words) for _ in range(rng.randint(4, 10))) for _ in range(20)]
    golds = [" ".join(rng.choice(vocab_words) for _ in range(rng.randint(4, 10))) for _ in range(20)]
    m = response_metrics(preds, golds)
    pt, gt = [p.split() for p in preds], [g.split() for g in golds]
    assert m["bleu4"] == pytest.approx(sum(oracles.bleu(p, [g]) for p, g in zip(pt, gt)) / 20, abs=1e-9)
    assert m["rouge1"] == pytest.approx(sum(oracles.rouge(p, g)[0] for p, g in zip(pt, gt)) / 20, abs=1e-9)
    assert m["rougeL"] == pytest.approx(sum(oracles.rouge(p, g)[1] for p, g in zip(pt, gt)) / 20, abs=1e-9)
    assert m["distinct4"] == pytest.approx(oracles.distinct(pt, 4)[0], abs=1e-9)


def test_empty_prediction_scores_zero():
    m = response_metrics(["", "a b c"], ["a b c", "a b c"])
    assert m["rouge1"] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        response_metrics(["a"], [])


def test_load_and_pair_responses(tmp_path):
    preds = tmp_path / "p.jsonl"
    golds = tmp_path / "g.jsonl"
    preds.write_text('{"id": "2", "text": "b"}\n{"id": "1", "response": "a"}\n')
    golds.write_text('{"__header__": true}\n{"id": "1", "text": "A"}\n{"id": "2", "text": "B"}\n')
    assert pair_responses(load_responses(preds), load_responses(golds)) == (["b", "a"], ["B", "A"])
    plain = tmp_path / "plain.txt"
    plain.write_text('first line\n"quoted"\n')
    assert load_responses(plain) == [(None, "first line"), (None, "quoted")]
    with pytest.raises(ValueError):
        pair_responses([(None, "x")], [(None, "y"), (None, "z")])
