import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lineare.kgdata import KnowledgeGraph
from lineare.model import TRANSE, EmbeddingStore, GradientSlice, ModelConfig, NumericalError, init_embeddings
from lineare.trainer import (
    HEAD,
    TAIL,
    AdamState,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    adversarial_weights,
    batch_loss,
    config_from_mapping,
    dump_config,
    load_config,
    parse_config_text,
    sample_negatives,
    train,
)

from oracles import random_store


def test_sample_negatives_two_entities():
    rng = np.random.default_rng(0)
    assert sample_negatives((0, 0, 1), 50, TAIL, rng, 2) == [(0, 0, 0)] * 50
    assert sample_negatives((0, 0, 1), 50, HEAD, rng, 2) == [(1, 0, 1)] * 50


def test_sample_negatives_single_entity_is_an_error():
    with pytest.raises(ValueError):
        sample_negatives((0, 0, 0), 3, TAIL, np.random.default_rng(0), 1)


def test_sample_negatives_deterministic():
    a = sample_negatives((3, 1, 4), 128, HEAD, np.random.default_rng(7), 20)
    b = sample_negatives((3, 1, 4), 128, HEAD, np.random.default_rng(7), 20)
    assert a == b
    assert all(x[1:] == (1, 4) and x[0] != 3 for x in a)


def test_sample_negatives_uniform_chi_square():
    num_entities, original = 17, 5
    negs = sample_negatives((0, 0, original), 100_000, TAIL, np.random.default_rng(11), num_entities)
    counts = np.bincount([t for _, _, t in negs], minlength=num_entities)
    assert counts[original] == 0
    observed = np.delete(counts, original)
    assert stats.chisquare(observed).pvalue > 0.001


def test_adversarial_weights_example():
    w = adversarial_weights([1.0, 2.0], 1.0)
    assert w == pytest.approx([math.e**-1 / (math.e**-1 + math.e**-2), math.e**-2 / (math.e**-1 + math.e**-2)], rel=1e-12)
    assert w == pytest.approx([0.7311, 0.2689], abs=1e-4)


def test_adversarial_weights_literal_flips():
    w = adversarial_weights([1.0, 2.0], 1.0, literal=True)
    assert w == pytest.approx([0.2689, 0.7311], abs=1e-4)


def test_adversarial_weights_uniform_cases():
    assert adversarial_weights([3.0, 3.0, 3.0, 3.0], 2.0) == pytest.approx([0.25] * 4)
    assert adversarial_weights([1.0, 9.0, 4.0], 0.0) == pytest.approx([1 / 3] * 3)


def test_adversarial_weights_rejects_non_finite():
    with pytest.raises(NumericalError):
        adversarial_weights([1.0, np.nan], 1.0)


@given(
    st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=40),
    st.floats(0, 5),
    st.floats(-100, 100),
)
@settings(max_examples=200, deadline=None)
def test_adversarial_weights_properties(scores, alpha, shift):
    w = adversarial_weights(scores, alpha)
    assert abs(w.sum() - 1.0) < 1e-12
    assert (w >= 0).all()
    shifted = adversarial_weights(np.array(scores) + shift, alpha)
    assert np.allclose(w, shifted, rtol=1e-9, atol=1e-12)


def test_adam_single_step_arithmetic():
    store = EmbeddingStore(np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
    state = AdamState.zeros_like(store)
    grads = GradientSlice({"rel_b": (np.array([0]), np.array([[1.0]]))})
    adam_step(store, grads, state, lr=0.1)
    # bias-corrected m_hat = 1, v_hat = 1, update = -lr / (1 + eps)
    assert store.rel_b[0, 0] == pytest.approx(-0.1 / (1 + 1e-8), rel=1e-12)
    assert state.t == 1


def test_adam_zero_gradient_row_unchanged_moments_decay():
    store = EmbeddingStore(np.ones((2, 2)), np.ones((1, 2)), np.ones((1, 2)), np.zeros((1, 2)))
    state = AdamState.zeros_like(store)
    adam_step(store, GradientSlice({"entity": (np.array([0]), np.array([[1.0, -1.0]]))}), state, 0.01)
    before = store.entity.copy()
    m_before = state.m["entity"][0].copy()
    adam_step(store, GradientSlice({"entity": (np.array([0]), np.zeros((1, 2)))}), state, 0.01)
    assert np.all(np.abs(state.m["entity"][0]) < np.abs(m_before))
    # untouched row 1 never moves
    assert (store.entity[1] == before[1]).all()


def test_adam_transe_freezes_weights():
    store = init_embeddings(3, 1, ModelConfig(2, TRANSE, 0))
    state = AdamState.zeros_like(store)
    g = {k: (np.array([0]), np.ones((1, 2))) for k in ("rel_w1", "rel_w2", "rel_b")}
    adam_step(store, GradientSlice(g), state, 0.1)
    assert (store.rel_w1 == 1).all() and (store.rel_w2 == 1).all()
    assert not (store.rel_b[0] == init_embeddings(3, 1, ModelConfig(2, TRANSE, 0)).rel_b[0]).all()


def test_adam_non_finite_update_names_row():
    store = EmbeddingStore(np.ones((3, 1)), np.ones((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
    state = AdamState.zeros_like(store)
    with pytest.raises(NumericalError) as err:
        adam_step(store, GradientSlice({"entity": (np.array([2]), np.array([[np.inf]]))}), state, 0.1)
    assert err.value.row == 2


def test_batch_loss_duplicate_positive_equals_single():
    rng = np.random.default_rng(0)
    s = random_store(rng, 6, 1, 3)
    cfg = TrainConfig(gamma=2.0, lam=0.0)
    neg = np.array([[[0, 0, 2], [0, 0, 3]]])
    single, _ = batch_loss(np.array([[0, 0, 1]]), neg, s, cfg)
    double, _ = batch_loss(np.array([[0, 0, 1]] * 2), np.concatenate([neg, neg]), s, cfg)
    assert double == pytest.approx(single, rel=1e-14)


def test_batch_loss_zero_entities_no_regularization():
    s = EmbeddingStore(np.zeros((3, 2)), np.ones((1, 2)), np.ones((1, 2)), np.ones((1, 2)))
    a, _ = batch_loss(np.array([[0, 0, 1]]), np.array([[[0, 0, 2]]]), s, TrainConfig(gamma=1.0, lam=0.0))
    b, _ = batch_loss(np.array([[0, 0, 1]]), np.array([[[0, 0, 2]]]), s, TrainConfig(gamma=1.0, lam=5.0))
    assert a == b


def test_batch_loss_hand_summed():
    # k = 2, entities 0..2, one relation with w1 = (1, 2), w2 = (1, 1), b = (0, -1)
    e = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    s = EmbeddingStore(e, np.array([[1.0, 2.0]]), np.array([[1.0, 1.0]]), np.array([[0.0, -1.0]]))
    pos = np.array([[0, 0, 1], [1, 0, 2]])
    neg = np.array([[[0, 0, 2]], [[0, 0, 2]]])
    gamma, beta, lam = 3.0, 1.0, 0.5
    sp = lambda x: math.log1p(math.exp(x))  # noqa: E731
    # f(0,1) = |1-0| + |0-1-1| = 3 ; f(1,2) = |0-2| + |2-1-2| = 3 ; f(0,2) = |1-2| + |0-1-2| = 4
    data = ((sp(3 - gamma) + sp(gamma - 4)) + (sp(3 - gamma) + sp(gamma - 4))) / 2
    reg = lam / 3 * (1 + 1 + 8)
    cfg = TrainConfig(gamma=gamma, beta=beta, lam=lam)
    loss, _ = batch_loss(pos, neg, s, cfg, weights=np.ones((2, 1)))
    assert loss == pytest.approx(data + reg, rel=1e-12)


def test_small_step_decreases_loss():
    rng = np.random.default_rng(3)
    cfg = TrainConfig(gamma=3.0, beta=1.0, lam=0.01)
    for _ in range(20):
        s = random_store(rng, 12, 3, 5)
        pos = np.column_stack([rng.integers(12, size=4), rng.integers(3, size=4), rng.integers(12, size=4)])
        neg = np.repeat(pos[:, None], 6, axis=1)
        neg[:, :, 2] = rng.integers(12, size=(4, 6))
        w = rng.dirichlet(np.ones(6), size=4)
        before, g = batch_loss(pos, neg, s, cfg, weights=w)
        adam_step(s, g, AdamState.zeros_like(s), lr=1e-5)
        after, _ = batch_loss(pos, neg, s, cfg, weights=w)
        assert after < before


def tiny_kg():
    rows = [(f"e{i}", "next", f"e{(i + 1) % 8}") for i in range(8)] + [(f"e{i}", "prev", f"e{(i - 1) % 8}") for i in range(8)]
    return KnowledgeGraph.from_named(rows[:-2], rows[-2:-1], rows[-1:])


def test_train_zero_steps_returns_initial_store():
    kg = tiny_kg()
    cfg = TrainConfig(dim=4, max_steps=0, seed=5)
    result = train(kg, cfg)
    assert result.store.equals(init_embeddings(kg.num_entities, kg.num_relations, ModelConfig(4, cfg.mode, 5)))
    assert result.log == []


def test_train_deterministic_and_logged():
    kg = tiny_kg()
    cfg = TrainConfig(dim=4, batch_size=4, num_negatives=3, max_steps=30, valid_every=10, learning_rate=0.01, gamma=2.0, seed=2)
    a, b = train(kg, cfg), train(kg, cfg)
    assert a.store.equals(b.store) and a.log == b.log
    assert [r["step"] for r in a.log] == list(range(1, 31))
    assert [r["step"] for r in a.log if "valid_mrr" in r] == [10, 20, 30]
    assert a.best_step in (10, 20, 30)


def test_transe_mode_weights_never_move():
    kg = tiny_kg()
    cfg = TrainConfig(dim=4, batch_size=8, num_negatives=4, max_steps=50, learning_rate=0.05, gamma=2.0, mode=TRANSE)
    store = train(kg, cfg).store
    assert (store.rel_w1 == 1.0).all() and (store.rel_w2 == 1.0).all()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_divergence_reports_last_good():
    kg = tiny_kg()
    cfg = TrainConfig(dim=2, batch_size=4, num_negatives=2, max_steps=5)
    start = init_embeddings(kg.num_entities, kg.num_relations, ModelConfig(2, cfg.mode, 0))
    start.entity[:, 0] = np.inf
    with pytest.raises(TrainingDiverged) as err:
        train(kg, cfg, store=start)
    assert err.value.step >= 1


def test_lr_decay_schedule():
    cfg = TrainConfig(learning_rate=1.0, max_steps=10)
    assert [cfg.lr_at(s) for s in (0, 4, 5, 9)] == [1.0, 1.0, pytest.approx(0.1), pytest.approx(0.1)]


def test_config_parsing_and_aliases(tmp_path):
    text = "# tuned values\nalpha = 1.0\nlambda=0.01  # reg\nk=50\nn=64\nb=512\nlr=3e-4\nmode=TransE\nfilter_negatives=yes\n\n"
    values = parse_config_text(text)
    assert values["lambda"] == "0.01"
    path = tmp_path / "c.cfg"
    path.write_text(text, encoding="utf-8")
    cfg = load_config(path, {"seed": "9"})
    assert (cfg.alpha, cfg.lam, cfg.dim, cfg.num_negatives, cfg.batch_size) == (1.0, 0.01, 50, 64, 512)
    assert cfg.learning_rate == 3e-4 and cfg.mode == TRANSE and cfg.filter_negatives and cfg.seed == 9
    assert config_from_mapping(parse_config_text(dump_config(cfg))) == cfg


def test_config_errors():
    with pytest.raises(ValueError):
        parse_config_text("alpha 1.0")
    with pytest.raises(ValueError):
        config_from_mapping({"no_such_key": "1"})
    with pytest.raises(ValueError):
        TrainConfig(num_negatives=0)


def test_grid_warnings_are_not_errors():
    cfg = TrainConfig(dim=20, gamma=1.0)
    assert any("dim" in w for w in cfg.grid_warnings())
    assert TrainConfig(alpha=0.5, gamma=12, beta=1.0, dim=500, batch_size=1024, num_negatives=128).grid_warnings() == []
