import numpy as np
import pytest

from photoqa.nncore import (
    LstmCellParams,
    NonFiniteGradient,
    ParamStore,
    adagrad_step,
    clip_global_norm,
    dense,
    grad_check,
    load_checkpoint,
    lstm_final,
    lstm_run,
    lstm_step,
    masked_softmax_ce,
    save_checkpoint,
    sgd_step,
    tape,
)


def _store(seed=0):
    return ParamStore(np.random.default_rng(seed))


def test_dense_identity():
    store = _store()
    W = store.add_value("W", np.eye(3))
    b = store.add_value("b", np.zeros(3))
    x = tape.leaf([1.0, -2.0, 3.0])
    y = dense(x, store.leaf("W"), store.leaf("b"), "linear")
    np.testing.assert_array_equal(y.value, [1.0, -2.0, 3.0])


def test_dense_relu_zero_gradient_on_negative():
    store = _store()
    store.add_value("W", np.array([[1.0]]))
    store.add_value("b", np.array([-5.0]))
    x = tape.leaf([1.0])
    y = dense(x, store.leaf("W"), store.leaf("b"), "relu")
    assert y.value[0] == 0.0
    tape.backward(y)
    assert store["W"].grad[0, 0] == 0.0


def test_dense_shape_mismatch():
    store = _store()
    store.add("W", (3, 4))
    store.add("b", (3,), init="zeros")
    with pytest.raises(ValueError, match="mismatch"):
        dense(tape.leaf(np.zeros(5)), store.leaf("W"), store.leaf("b"))


@pytest.mark.parametrize("activation", ["linear", "relu", "tanh", "sigmoid"])
def test_dense_gradcheck(activation):
    store = _store(3)
    store.add("W", (4, 6))
    store.add("b", (4,), init="zeros")
    x_val = np.random.default_rng(5).standard_normal(6)
    target_vec = np.random.default_rng(6).standard_normal(4)

    def closure():
        y = dense(tape.leaf(x_val), store.leaf("W"), store.leaf("b"), activation)
        diff = tape.add(y, tape.leaf(-target_vec))
        return tape.dot(diff, diff)

    report = grad_check(closure, store, max_coords_per_param=10)
    assert report.passed, report


def test_lstm_empty_sequence_zero_state():
    store = _store()
    cell = LstmCellParams(store, "lstm", 4, 3)
    W, b = cell.leaves()
    out = lstm_final(W, b, tape.leaf(np.zeros((0, 4))), 3)
    np.testing.assert_array_equal(out.value, np.zeros(3))


def test_lstm_all_zero_weights_gives_zero_hidden():
    store = _store()
    cell = LstmCellParams(store, "lstm", 4, 3)
    store["lstm_W"].value[...] = 0.0
    store["lstm_b"].value[...] = 0.0
    W, b = cell.leaves()
    H = lstm_run(W, b, tape.leaf(np.ones((5, 4))), 3)
    np.testing.assert_array_equal(H.value, np.zeros((5, 3)))


def test_lstm_run_matches_stepwise_composition():
    store = _store(11)
    cell = LstmCellParams(store, "lstm", 4, 3)
    W, b = cell.leaves()
    X_val = np.random.default_rng(7).standard_normal((6, 4))
    H = lstm_run(W, b, tape.leaf(X_val), 3)

    h = tape.leaf(np.zeros(3))
    c = tape.leaf(np.zeros(3))
    for t in range(6):
        h, c = lstm_step(W, b, tape.leaf(X_val[t]), h, c, 3)
    np.testing.assert_allclose(H.value[-1], h.value, rtol=1e-12, atol=1e-14)


def test_lstm_gradcheck_through_sequence():
    store = _store(2)
    cell = LstmCellParams(store, "lstm", 3, 4)
    X_val = np.random.default_rng(9).standard_normal((3, 3))
    weight_vec = np.random.default_rng(10).standard_normal(4)

    def closure():
        W, b = cell.leaves()
        H = lstm_run(W, b, tape.leaf(X_val), 4)
        total = tape.dot(tape.row(H, 0), tape.leaf(weight_vec))
        for t in (1, 2):
            total = tape.add(total, tape.dot(tape.row(H, t), tape.leaf(weight_vec)))
        return total

    report = grad_check(closure, store, max_coords_per_param=12)
    assert report.passed, report


def test_softmax_properties():
    x = tape.leaf([0.3, -1.0, 2.0, 0.0])
    y = tape.softmax(x)
    assert abs(y.value.sum() - 1.0) < 1e-12
    assert np.all(y.value > 0)


def test_masked_ce_uniform_logits():
    logits = tape.leaf(np.zeros(10))
    mask = np.zeros(10, dtype=bool)
    mask[[1, 3, 5, 7]] = True
    loss = masked_softmax_ce(logits, mask, target=3)
    assert abs(float(loss.value) - np.log(4)) < 1e-12


def test_masked_ce_shift_invariance():
    vals = np.array([0.1, 0.9, -0.3, 0.5, 2.0])
    mask = np.array([True, True, False, True, True])
    base = masked_softmax_ce(tape.leaf(vals), mask, target=1)
    shifted_vals = vals.copy()
    shifted_vals[mask] += 7.3
    shifted = masked_softmax_ce(tape.leaf(shifted_vals), mask, target=1)
    assert abs(float(base.value) - float(shifted.value)) < 1e-9


def test_masked_ce_target_masked_out_raises():
    with pytest.raises(ValueError, match="masked out"):
        masked_softmax_ce(tape.leaf(np.zeros(4)), np.array([True, True, False, False]), 2)


def test_masked_ce_gradient_zero_outside_mask():
    logits = tape.leaf(np.array([0.2, -0.1, 0.4, 0.9, 0.0]))
    mask = np.array([True, False, True, False, True])
    loss = masked_softmax_ce(logits, mask, target=2)
    tape.backward(loss)
    assert logits.grad[1] == 0.0 and logits.grad[3] == 0.0


def test_masked_ce_gradcheck():
    store = _store(4)
    store.add("logits", (6,))
    mask = np.array([True, True, False, True, False, True])

    def closure():
        return masked_softmax_ce(store.leaf("logits"), mask, target=3)

    report = grad_check(closure, store, max_coords_per_param=6)
    assert report.passed, report


def test_sgd_zero_grad_keeps_value():
    store = _store()
    p = store.add_value("w", np.array([1.0, 2.0]))
    sgd_step(store, lr=0.1)
    np.testing.assert_array_equal(p.value, [1.0, 2.0])


def test_sgd_quadratic_convergence():
    store = _store()
    p = store.add_value("theta", np.array([1.0]))
    for _ in range(100):
        p.grad[...] = 2.0 * p.value  # d/dtheta theta^2
        sgd_step(store, lr=0.1)
    assert abs(p.value[0]) < 1e-3
    # closed form: (1 - 2*lr)^steps
    assert abs(p.value[0] - 0.8**100) < 1e-12


def test_adagrad_second_step_smaller():
    store = _store()
    p = store.add_value("w", np.array([0.0]))
    p.grad[...] = 1.0
    adagrad_step(store, lr=0.1)
    first = abs(p.value[0])
    prev = p.value[0]
    p.grad[...] = 1.0
    adagrad_step(store, lr=0.1)
    second = abs(p.value[0] - prev)
    assert second < first


def test_nonfinite_gradient_named():
    store = _store()
    store.add_value("fine", np.array([1.0]))
    p = store.add_value("broken", np.array([1.0]))
    p.grad[...] = np.nan
    with pytest.raises(NonFiniteGradient, match="broken"):
        sgd_step(store, lr=0.1)


def test_clip_global_norm():
    store = _store()
    a = store.add_value("a", np.zeros(3))
    b = store.add_value("b", np.zeros(4))
    a.grad[...] = 3.0
    b.grad[...] = 4.0
    norm = clip_global_norm(store, max_norm=1.0)
    assert norm > 1.0
    total = np.sum(a.grad**2) + np.sum(b.grad**2)
    assert abs(np.sqrt(total) - 1.0) < 1e-12


def test_gradcheck_detects_corrupted_backward():
    store = _store(8)
    store.add("w", (3,))
    x_val = np.array([0.5, -1.0, 2.0])

    def closure():
        w = store.leaf("w")
        y = tape.dot(w, tape.leaf(x_val))
        out = tape.Tensor(y.value, (w,))

        def bad_bwd(g):
            tape._acc(w, -g * x_val)  # sign-flipped gradient

        out.bwd = bad_bwd
        return out

    report = grad_check(closure, store, max_coords_per_param=3)
    assert not report.passed


def test_param_init_deterministic():
    a = _store(42)
    b = _store(42)
    pa = a.add("w", (4, 5))
    pb = b.add("w", (4, 5))
    np.testing.assert_array_equal(pa.value, pb.value)
    limit = np.sqrt(6.0 / (5 + 4))
    assert np.all(np.abs(pa.value) <= limit)


def test_forward_repeat_bit_identical():
    store = _store(5)
    cell = LstmCellParams(store, "lstm", 4, 6)
    X_val = np.random.default_rng(3).standard_normal((5, 4))

    def run():
        W, b = cell.leaves()
        return lstm_run(W, b, tape.leaf(X_val), 6).value

    np.testing.assert_array_equal(run(), run())


def test_checkpoint_round_trip(tmp_path):
    store = _store(7)
    store.add("w1", (3, 4))
    store.add("b1", (3,), init="zeros")
    meta = {"kind": "test", "hyper": {"k": 2}}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, store.state(), meta)
    loaded_meta, values = load_checkpoint(path)
    assert loaded_meta == meta
    for name in ("w1", "b1"):
        np.testing.assert_array_equal(values[name], store[name].value)
    # restoring yields bit-identical forward outputs
    x = np.random.default_rng(1).standard_normal(4)
    before = store["w1"].value @ x + store["b1"].value
    store["w1"].value[...] = 0
    store.load_state(values)
    after = store["w1"].value @ x + store["b1"].value
    np.testing.assert_array_equal(before, after)
