import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lineare.evaluator import (
    PREDICT_HEAD,
    PREDICT_TAIL,
    MetricsReport,
    auc_pr,
    countries_auc_pr,
    evaluate,
    evaluate_by_category,
    evaluate_countries,
    rank_split,
    ranks_csv,
    report_csv,
    report_json,
    tie_averaged_rank,
)
from lineare.kgdata import KnowledgeGraph
from lineare.model import EmbeddingStore, score_all_heads, score_all_tails

from oracles import brute_force_rank, random_kg, random_store


def test_unique_minimum_ranks_first():
    assert tie_averaged_rank(np.array([3.0, 0.5, 2.0]), 1) == 1.0


def test_full_tie_rank():
    n = 9
    assert tie_averaged_rank(np.zeros(n), 4) == (n + 1) / 2


def test_filtered_candidates_removed_but_target_kept():
    scores = np.array([0.0, 1.0, 2.0, 3.0])
    assert tie_averaged_rank(scores, 3, excluded=[0, 1, 3]) == 2.0


def test_metrics_from_ranks_example():
    m = MetricsReport.from_ranks([1, 4])
    assert (m.mr, m.mrr, m.hits1, m.hits3, m.hits10) == (2.5, 0.625, 0.5, 0.5, 1.0)


def test_single_triple_ranked_first():
    kg = KnowledgeGraph.from_named([("a", "r", "b")], [], [("b", "r", "c")])
    e = np.array([[0.0], [1.0], [2.0]])
    s = EmbeddingStore(e, np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
    rep = evaluate(s, kg, "test")
    assert (rep.mr, rep.mrr, rep.hits1, rep.hits10, rep.count) == (1.0, 1.0, 1.0, 1.0, 2)


def test_five_entity_hand_store_matches_oracle():
    rng = np.random.default_rng(0)
    s = random_store(rng, 5, 1, 3)
    for h in range(5):
        for t in range(5):
            scores = score_all_tails(s, h, 0)
            assert tie_averaged_rank(scores, t) == brute_force_rank(scores.tolist(), t)


def test_evaluate_matches_brute_force_on_random_kgs():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        kg = random_kg(rng)
        store = random_store(rng, kg.num_entities, kg.num_relations, 4)
        # quantize so ties actually occur
        store.entity = np.round(store.entity, 1)
        for rec in rank_split(store, kg, "test"):
            h, r, t = rec.triple
            if rec.direction == PREDICT_TAIL:
                scores, target, known = score_all_tails(store, h, r), t, kg.filter.true_tails(h, r)
            else:
                scores, target, known = score_all_heads(store, r, t), h, kg.filter.true_heads(r, t)
            assert rec.rank == brute_force_rank(scores.tolist(), target, known)


def test_parallel_ranking_identical():
    rng = np.random.default_rng(5)
    kg = random_kg(rng)
    store = random_store(rng, kg.num_entities, kg.num_relations, 4)
    a = evaluate(store, kg, "valid", workers=1)
    b = evaluate(store, kg, "valid", workers=3)
    assert report_json(a) == report_json(b) and a.records == b.records


def test_store_vocab_mismatch_raises():
    kg = KnowledgeGraph.from_named([("a", "r", "b")], [], [("b", "r", "a")])
    s = random_store(np.random.default_rng(0), 5, 1, 2)
    with pytest.raises(ValueError):
        evaluate(s, kg)


def test_filtered_rank_never_exceeds_raw():
    rng = np.random.default_rng(9)
    for _ in range(5):
        kg = random_kg(rng)
        s = random_store(rng, kg.num_entities, kg.num_relations, 3)
        filt = rank_split(s, kg, "test")
        raw = rank_split(s, kg, "test", filtered=False)
        assert all(f.rank <= r.rank for f, r in zip(filt, raw))


@given(st.lists(st.integers(0, 6), min_size=3, max_size=30), st.data())
@settings(max_examples=100, deadline=None)
def test_more_filtering_never_increases_rank(values, data):
    scores = np.array(values, dtype=float)
    target = data.draw(st.integers(0, len(values) - 1))
    base = data.draw(st.sets(st.integers(0, len(values) - 1)))
    extra = data.draw(st.integers(0, len(values) - 1))
    assert tie_averaged_rank(scores, target, base | {extra}) <= tie_averaged_rank(scores, target, base)
    assert tie_averaged_rank(scores, target, base) == brute_force_rank(values, target, base)


@given(st.lists(st.floats(1, 1000), min_size=1, max_size=50))
def test_hits_monotone(ranks):
    m = MetricsReport.from_ranks(ranks)
    assert m.hits1 <= m.hits3 <= m.hits10
    assert 0 < m.mrr <= 1 and m.mr >= 1


def one_to_n_kg():
    train = [("a", "has", "x"), ("a", "has", "y"), ("a", "has", "z"), ("b", "pair", "c")]
    test = [("a", "has", "w"), ("c", "pair", "b")]
    return KnowledgeGraph.from_named(train, [], test)


def test_breakdowns_and_category_report():
    kg = one_to_n_kg()
    s = random_store(np.random.default_rng(1), kg.num_entities, kg.num_relations, 3)
    rep = evaluate(s, kg)
    assert set(rep.breakdowns) == {PREDICT_HEAD, PREDICT_TAIL}
    assert set(rep.breakdowns[PREDICT_TAIL]) == {"all", "1-to-N", "1-to-1"}
    table = evaluate_by_category(s, kg)
    assert set(table[PREDICT_HEAD]) == {"1-to-N", "1-to-1"}
    assert table[PREDICT_TAIL]["1-to-N"]["count"] == 1


def test_single_category_report():
    train = [("a", "in", "z"), ("b", "in", "z"), ("c", "in", "z")]
    kg = KnowledgeGraph.from_named(train, [], [("d", "in", "z")])
    s = random_store(np.random.default_rng(1), kg.num_entities, kg.num_relations, 3)
    assert list(evaluate_by_category(s, kg)[PREDICT_TAIL]) == ["N-to-1"]


def test_report_writers_deterministic():
    kg = one_to_n_kg()
    s = random_store(np.random.default_rng(1), kg.num_entities, kg.num_relations, 3)
    a, b = evaluate(s, kg), evaluate(s, kg)
    assert report_json(a) == report_json(b) and report_csv(a) == report_csv(b)
    parsed = json.loads(report_json(a))
    assert parsed["count"] == 4 and "1-to-N" in parsed["breakdowns"][PREDICT_TAIL]
    assert report_csv(a).splitlines()[0] == "direction,category,count,mr,mrr,hits1,hits3,hits10"
    assert len(ranks_csv(a.records, kg).splitlines()) == 5


def test_auc_pr_examples():
    assert auc_pr([2.0, 1.0], [1, 0]) == 0.5
    assert auc_pr([0.1, 0.2, 5.0, 6.0], [1, 1, 0, 0]) == 1.0
    with pytest.raises(ValueError):
        auc_pr([1.0, 2.0], [0, 0])


def test_auc_pr_ties_grouped():
    # all tied: precision at the single threshold is the positive rate
    assert auc_pr([1.0] * 4, [1, 0, 0, 0]) == 0.25


def test_auc_pr_random_baseline():
    rng = np.random.default_rng(0)
    labels = rng.permutation(np.repeat([0, 1], 5000))
    assert abs(auc_pr(rng.random(10_000), labels) - 0.5) < 0.02


@given(
    st.lists(st.tuples(st.integers(-50, 50), st.booleans()), min_size=2, max_size=40).filter(
        lambda xs: any(y for _, y in xs)
    )
)
@settings(max_examples=100, deadline=None)
def test_auc_pr_monotone_invariance(pairs):
    scores = np.array([s for s, _ in pairs], dtype=float)
    labels = np.array([y for _, y in pairs])
    base = auc_pr(scores, labels)
    assert 0 < base <= 1
    assert auc_pr(np.exp(scores / 10), labels) == pytest.approx(base, abs=1e-12)
    assert auc_pr(3 * scores + 7, labels) == pytest.approx(base, abs=1e-12)


def test_countries_auc_pr_untrained_near_label_ratio():
    regions = [f"region{i}" for i in range(5)]
    train = [(f"c{i}", "locatedIn", regions[i % 5]) for i in range(100)]
    test = [(f"t{i}", "locatedIn", regions[i % 5]) for i in range(200)]
    kg = KnowledgeGraph.from_named(train, [], test)
    results = []
    for seed in range(10):
        s = random_store(np.random.default_rng(seed), kg.num_entities, kg.num_relations, 8)
        results.append(countries_auc_pr(s, kg, "locatedIn", regions))
    # random ranking among 5 regions with one positive: AP is close to the label ratio (0.2)
    assert abs(np.mean(results) - 0.2) < 0.1
    assert evaluate_countries([s, s], kg, regions) == [results[-1]] * 2


def test_countries_perfect_store():
    regions = ["north", "south"]
    kg = KnowledgeGraph.from_named([("a", "locatedIn", "north"), ("b", "locatedIn", "south")], [], [("c", "locatedIn", "north")])
    ids = kg.vocab.entity_ids
    e = np.zeros((kg.num_entities, 1))
    e[ids["north"]] = 1.0
    e[ids["c"]] = 1.0
    e[ids["south"]] = -1.0
    s = EmbeddingStore(e, np.ones((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
    assert countries_auc_pr(s, kg, "locatedIn", regions) == 1.0
