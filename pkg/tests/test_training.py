"""Optimizer oracle, chunk iteration semantics and the shared-policy
reduction to a plain threaded LSTM."""
import numpy as np
import pytest

from statesep._kernel_py import _pred_chain
from statesep.lstm import LstmParams, forward_sequence, sequence_loss_accuracy
from statesep.numerics import Rng
from statesep.states import StateStore, make_policy
from statesep.tasks import PatternSpec, Task, Vocabulary, make_pattern_task
from statesep.training import Adam, Trainer


def reference_adam(thetas, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook Adam recurrence, scalar python floats."""
    out = []
    for theta, gs in zip(thetas, grads):
        m = v = 0.0
        for t, g in enumerate(gs, start=1):
            m = beta1 * m + (1.0 - beta1) * g
            v = beta2 * v + (1.0 - beta2) * g * g
            mhat = m / (1.0 - beta1 ** t)
            vhat = v / (1.0 - beta2 ** t)
            theta -= lr * mhat / (vhat ** 0.5 + eps)
        out.append(theta)
    return out


def test_adam_three_step_oracle():
    theta = np.array([1.0, -2.0, 0.5])
    grads = [np.array([0.3, -1.1, 0.0]),
             np.array([-0.2, 0.4, 2.0]),
             np.array([0.7, 0.7, -0.3])]
    opt = Adam(3, lr=0.05)
    for g in grads:
        opt.step(theta, g)
    want = reference_adam([1.0, -2.0, 0.5],
                          [[0.3, -0.2, 0.7], [-1.1, 0.4, 0.7], [0.0, 2.0, -0.3]],
                          lr=0.05)
    assert opt.t == 3
    np.testing.assert_allclose(theta, want, rtol=1e-12)


def test_adam_first_step_epsilon_outside_sqrt():
    # From zero moments, step 1 moves by lr*g/(|g|+eps). A tiny gradient
    # still moves nearly a full lr; epsilon inside the sqrt would shrink
    # the move by ~10x at g=1e-5.
    g = 1e-5
    theta = np.array([0.0])
    opt = Adam(1, lr=1.0)
    opt.step(theta, np.array([g]))
    np.testing.assert_allclose(-theta[0], g / (g + 1e-8), rtol=1e-12)
    assert -theta[0] > 0.99


def test_adam_shape_mismatch():
    opt = Adam(4)
    with pytest.raises(ValueError):
        opt.step(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        opt.step(np.zeros(4), np.zeros(5))


def test_pred_chain():
    rows = np.array([0, 0, 1, 0, 1, 2], dtype=np.int64)
    np.testing.assert_array_equal(_pred_chain(rows),
                                  [-1, 0, -1, 1, 2, -1])


def _toy_task(length=20, vocab=4):
    rng = Rng(7)
    ids = rng.integers(0, vocab, length)
    targets = rng.integers(0, vocab, length)
    return Task("toy", ids, targets, Vocabulary([0, 1, 2, 3]))


def test_chunks_cover_stream_in_order():
    task = _toy_task(20)
    params = LstmParams(4, 3, 5)
    params.init(Rng(0))
    tr = Trainer(params, make_policy("task"), window=8)
    parts = list(tr.chunks(task))
    assert [len(ids) for ids, _, _ in parts] == [8, 8, 4]
    np.testing.assert_array_equal(np.concatenate([i for i, _, _ in parts]),
                                  task.inputs)
    np.testing.assert_array_equal(np.concatenate([t for _, t, _ in parts]),
                                  task.targets)
    # one task => one bank row everywhere
    rows = np.concatenate([r for _, _, r in parts])
    assert set(rows.tolist()) == {tr.store.row("toy")}


def test_chunks_label_policy_rows_follow_symbols():
    task = _toy_task(16)
    params = LstmParams(4, 3, 5)
    params.init(Rng(0))
    tr = Trainer(params, make_policy("label"), window=16)
    (ids, _, rows), = tr.chunks(task)
    want = np.array([tr.store.row(int(s)) for s in ids])
    np.testing.assert_array_equal(rows, want)


def test_window_validation():
    params = LstmParams(4, 3, 5)
    with pytest.raises(ValueError):
        Trainer(params, make_policy("shared"), window=0)


def test_train_pass_learns_constant_pattern():
    vocab = Vocabulary()
    task = make_pattern_task(PatternSpec((2, 2, -3, -3, -3), total_length=512),
                             vocab, task_id="t1")
    params = LstmParams(len(vocab), 16, 16)
    params.init(Rng(3).child("init"))
    tr = Trainer(params, make_policy("shared"))
    first_loss, _ = tr.train_pass(task)
    for _ in range(19):
        last_loss, last_acc = tr.train_pass(task)
    assert last_loss < first_loss
    assert last_acc >= 0.9


def test_evaluate_is_side_effect_free():
    task = _toy_task(100)
    params = LstmParams(4, 6, 8)
    params.init(Rng(1))
    tr = Trainer(params, make_policy("task"))
    tr.train_pass(task)
    theta_before = params.flat.tobytes()
    snap_before = tr.store.snapshot()
    t_before = tr.adam.t
    r1 = tr.evaluate(task)
    r2 = tr.evaluate(task)
    assert r1 == r2
    assert params.flat.tobytes() == theta_before
    assert tr.adam.t == t_before
    snap_after = tr.store.snapshot()
    assert snap_before["index"] == snap_after["index"]
    np.testing.assert_array_equal(snap_before["c"], snap_after["c"])
    np.testing.assert_array_equal(snap_before["h"], snap_after["h"])


def test_evaluate_can_commit_state():
    task = _toy_task(50)
    params = LstmParams(4, 6, 8)
    params.init(Rng(1))
    tr = Trainer(params, make_policy("task"))
    zero = tr.store.fetch("toy")[0].copy()
    tr.evaluate(task, preserve_store=False)
    assert not np.array_equal(tr.store.fetch("toy")[0], zero)


def test_shared_store_reduces_to_threaded_lstm():
    # 1,000 random steps: carrying (c,h) through the shared bank row chunk
    # by chunk must equal one uninterrupted pass, logit for logit.
    rng = Rng(99)
    vocab = 17
    n = 1000
    ids = rng.integers(0, vocab, n)
    targets = rng.integers(0, vocab, n)
    params = LstmParams(vocab, 12, 24)
    params.init(rng.child("init"))

    whole_logits, _, _ = forward_sequence(params, ids)

    store = StateStore(params.hidden)
    policy = make_policy("shared")
    window = 32
    chunked = []
    for lo in range(0, n, window):
        key = policy.key_for("any-task", 0)
        c, h = store.fetch(key)
        logits, c, h = forward_sequence(params, ids[lo:lo + window], c, h)
        store.commit(key, c, h)
        chunked.append(logits)
    np.testing.assert_array_equal(np.concatenate(chunked), whole_logits)

    # the kernel evaluation path agrees on loss and accuracy
    task = Task("any-task", ids, targets, Vocabulary(list(range(vocab))))
    tr = Trainer(params, policy)
    loss, acc = tr.evaluate(task)
    want_loss, want_acc = sequence_loss_accuracy(whole_logits, targets)
    assert acc == want_acc
    np.testing.assert_allclose(loss, want_loss, rtol=1e-12)


def test_training_changes_weights_only_through_adam():
    # a pass with zero-length penalty leaves adam.t equal to chunk count
    task = _toy_task(64)
    params = LstmParams(4, 5, 6)
    params.init(Rng(2))
    tr = Trainer(params, make_policy("shared"), window=16)
    tr.train_pass(task)
    assert tr.adam.t == 4
