import numpy as np
import pytest

from photoqa.corpus import split_qas
from photoqa.evaluation import evaluate
from photoqa.index import build_index
from photoqa.lookupnet import (
    LookupHyper,
    answer,
    build_lookup_model,
    choice_loss,
    load_lookup_model,
    save_lookup_model,
    train_lookup_model,
)
from photoqa.nncore import grad_check, tape
from photoqa.synthetic import SynthConfig, generate_synthetic
from photoqa.training import TrainSettings


@pytest.fixture(scope="module")
def tiny_world():
    corpus, features, key = generate_synthetic(SynthConfig(1, 2, 4, 2), seed=1)
    index = build_index(corpus)
    model = build_lookup_model(
        corpus, LookupHyper(feature_dim=features.dim), seed=0
    )
    return corpus, features, key, index, model


def test_shape_law_lookup_dim():
    for v in (3, 9):
        for k in (1, 2, 3):
            hyper = LookupHyper(top_k=k, modality_count=v, feature_dim=300)
            assert hyper.lookup_dim == v * (k * 20 + 5)


def test_classifier_input_dim_at_reference_constants():
    hyper = LookupHyper(top_k=2, modality_count=9, feature_dim=300)
    assert hyper.classifier_input_dim == 100 + 9 * 45 + 600 == 1105


def test_forward_logits_shape_and_range(tiny_world):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    logits, trace = model.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
    assert logits.value.shape == (4,)
    assert np.all(np.isfinite(logits.value))
    assert np.all((logits.value > 0) & (logits.value < 1))  # sigmoid head
    assert len(trace.choice_classes) == 4


def test_rank_attention_singleton_alpha_one(tiny_world):
    _, _, _, _, model = tiny_world
    e = tape.leaf(np.random.default_rng(0).standard_normal(model.hyper.rank_input_dim))
    w2q = tape.leaf(np.zeros(model.hyper.rank_hidden))
    state, alpha = model.rank_attention([e], w2q)
    np.testing.assert_allclose(alpha.value, [1.0])
    assert state.value.shape == (model.hyper.rank_hidden,)


def test_rank_attention_identical_hidden_states_symmetric(tiny_world):
    # With zero rank-LSTM weights both hidden states are identical, so the
    # attention must split evenly.
    _, _, _, _, model = tiny_world
    w_backup = model.store["rank_lstm_W"].value.copy()
    b_backup = model.store["rank_lstm_b"].value.copy()
    model.store["rank_lstm_W"].value[...] = 0.0
    model.store["rank_lstm_b"].value[...] = 0.0
    try:
        e = tape.leaf(np.ones(model.hyper.rank_input_dim))
        w2q = tape.leaf(np.random.default_rng(3).standard_normal(model.hyper.rank_hidden))
        _, alpha = model.rank_attention([e, e], w2q)
        np.testing.assert_allclose(alpha.value, [0.5, 0.5], atol=1e-12)
    finally:
        model.store["rank_lstm_W"].value[...] = w_backup
        model.store["rank_lstm_b"].value[...] = b_backup


def test_alphas_sum_to_one(tiny_world):
    corpus, features, key, index, model = tiny_world
    for qa in list(corpus.qas.values())[:6]:
        _, trace = model.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
        for alpha in trace.alphas.values():
            if alpha is not None:
                assert abs(sum(alpha) - 1.0) < 1e-12


def test_gating_no_shared_stems_all_pilot(tiny_world):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    alien = ["xylophone", "quagmire", "zeppelin", "obelisk"]
    _, trace = model.forward(qa.question, alien, qa.user_id, corpus, index, features)
    non_null = [m for m in trace.matches if not m["null"]]
    assert non_null
    assert all(m["slot"] is None for m in non_null)
    assert all(m["class_index"] == model.answer_vocab.pilot_index for m in non_null)


def test_planted_answer_matched_at_recorded_modality(tiny_world):
    corpus, features, key, index, model = tiny_world
    checked = 0
    for qa in corpus.qas.values():
        rec = key[qa.qa_id]
        _, trace = model.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
        ranks = {pid: r for r, (pid, _) in enumerate(trace.retrieved)}
        assert rec["photo_id"] in ranks  # retrieval found the planted photo
        planted_rank = ranks[rec["photo_id"]]
        match = [
            m for m in trace.matches
            if m["modality"] == rec["planted_modality"] and m["rank"] == planted_rank
        ]
        assert match and match[0]["slot"] == qa.correct_index
        checked += 1
    assert checked == len(corpus.qas)


def test_empty_retrieval_uses_null_samples(tiny_world):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    logits, trace = model.forward(
        "zzzz qqqq xxxx", qa.choices, qa.user_id, corpus, index, features
    )
    assert logits.value.shape == (4,)
    assert trace.retrieved == [] or len(trace.retrieved) <= 2
    if not trace.retrieved:
        assert all(m["null"] for m in trace.matches)


def test_choice_loss_uniform_and_saturated():
    logits = tape.leaf(np.full(4, 0.37))
    assert abs(float(choice_loss(logits, 2).value) - np.log(4)) < 1e-12
    saturated = tape.leaf(np.array([1.0, 0.0, 0.0, 0.0]))
    expected = -np.log(np.e / (np.e + 3.0))
    assert abs(float(choice_loss(saturated, 0).value) - expected) < 1e-12


def test_loss_decreases_after_one_adagrad_step(tiny_world):
    corpus, features, key, index, _ = tiny_world
    from photoqa.nncore import adagrad_step

    model = build_lookup_model(corpus, LookupHyper(feature_dim=features.dim), seed=3)
    qa = next(iter(corpus.qas.values()))
    sample = model.prepare(qa.question, qa.choices, qa.user_id, corpus, index, features)

    logits, _ = model.forward_prepared(sample)
    before = float(choice_loss(logits, qa.correct_index).value)
    loss = choice_loss(model.forward_prepared(sample)[0], qa.correct_index)
    tape.backward(loss)
    adagrad_step(model.store, lr=0.1)
    logits_after, _ = model.forward_prepared(sample)
    after = float(choice_loss(logits_after, qa.correct_index).value)
    assert after < before


def test_full_model_gradcheck(tiny_world):
    corpus, features, key, index, _ = tiny_world
    model = build_lookup_model(corpus, LookupHyper(feature_dim=features.dim), seed=7)
    qa = next(iter(corpus.qas.values()))
    sample = model.prepare(qa.question, qa.choices, qa.user_id, corpus, index, features)

    def closure():
        logits, _ = model.forward_prepared(sample)
        return choice_loss(logits, qa.correct_index)

    report = grad_check(closure, model.store, max_coords_per_param=3, seed=11)
    assert report.passed, (report.max_rel_err, report.worst_param)


def test_prediction_shift_invariance():
    # adding a constant to all 4 choice logits cannot change the argmax
    rng = np.random.default_rng(0)
    for _ in range(20):
        logits = rng.standard_normal(4)
        shifted = logits + rng.uniform(-5, 5)
        assert np.argmax(logits) == np.argmax(shifted)


def test_forward_deterministic(tiny_world):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    a, _ = model.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
    b, _ = model.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
    np.testing.assert_array_equal(a.value, b.value)


def test_answer_entry_point(tiny_world):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    result = answer(qa.question, qa.choices, qa.user_id, model, corpus, index, features)
    assert result.answer in qa.choices
    assert 0.0 < result.confidence <= 1.0
    assert result.evidence == [pid for pid, _ in result.trace.retrieved]
    with pytest.raises(ValueError, match="unknown user"):
        answer(qa.question, qa.choices, "nobody", model, corpus, index, features)
    with pytest.raises(ValueError, match="distinct"):
        answer(qa.question, ["x", "x", "X", " x"], qa.user_id, model, corpus, index, features)


def test_checkpoint_round_trip_preserves_outputs(tiny_world, tmp_path):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    before, _ = model.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
    path = tmp_path / "lookup.ckpt"
    save_lookup_model(model, path)
    loaded, meta = load_lookup_model(path)
    after, _ = loaded.forward(qa.question, qa.choices, qa.user_id, corpus, index, features)
    np.testing.assert_array_equal(before.value, after.value)
    assert meta["kind"] == "lookup"


def test_short_training_deterministic():
    corpus, features, _ = generate_synthetic(SynthConfig(1, 2, 4, 2), seed=5)
    split = split_qas(sorted(corpus.qas), seed=5, ratios=(0.8, 0.1, 0.1))
    hyper = LookupHyper(feature_dim=features.dim)

    def run():
        model, hist = train_lookup_model(
            corpus, features, split, hyper, TrainSettings(epochs=2, seed=9)
        )
        return [e.train_loss for e in hist.epochs], model.store.state()

    curve_a, state_a = run()
    curve_b, state_b = run()
    assert curve_a == curve_b
    for name in state_a:
        np.testing.assert_array_equal(state_a[name], state_b[name])


def test_pretrained_encoder_state_loads_into_lookup_model():
    # pretraining and fine-tuning share tensor shapes, so encoder checkpoints
    # are interchangeable between the two phases
    from photoqa.lookupnet import pretrain_encoder_state

    corpus, features, _ = generate_synthetic(SynthConfig(1, 2, 4, 2), seed=3)
    state = pretrain_encoder_state(corpus, epochs=1, seed=0)
    model = build_lookup_model(corpus, LookupHyper(feature_dim=features.dim), seed=0)
    encoder_only = {k: v for k, v in state.items() if k.startswith("q_")}
    assert encoder_only
    model.store.load_state(encoder_only)
    for name, value in encoder_only.items():
        np.testing.assert_array_equal(model.store[name].value, value)


def test_all_pilot_choices_give_uniform_confidence(tiny_world):
    corpus, features, key, index, model = tiny_world
    qa = next(iter(corpus.qas.values()))
    alien = ["xylophone", "quagmire", "zeppelin", "obelisk"]
    result = answer(qa.question, alien, qa.user_id, model, corpus, index, features)
    # all four choices read the pilot logit, so confidence is exactly uniform
    assert abs(result.confidence - 0.25) < 1e-12


def test_untrained_accuracy_near_chance():
    corpus, features, _ = generate_synthetic(SynthConfig(2, 2, 6, 4), seed=13)
    index = build_index(corpus)
    model = build_lookup_model(corpus, LookupHyper(feature_dim=features.dim), seed=13)
    report = evaluate(model.predict(corpus, index, features), corpus.qas.values())
    assert 0.10 <= report.overall <= 0.45
