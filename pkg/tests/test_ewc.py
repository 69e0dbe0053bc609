"""Fisher estimate against an independent recomputation, and the quadratic
penalty against closed forms and finite differences."""
import numpy as np
import pytest

from statesep.backend import get_backend
from statesep.ewc import EwcPenalty, estimate_fisher, fisher_positions
from statesep.lstm import LstmParams, forward_sequence
from statesep.numerics import Rng
from statesep.states import make_policy
from statesep.tasks import Task, Vocabulary
from statesep.training import Trainer


def test_fisher_positions_closed_forms():
    np.testing.assert_array_equal(fisher_positions(10, 3), [0, 3, 6])
    np.testing.assert_array_equal(fisher_positions(4, 4), [0, 1, 2, 3])
    np.testing.assert_array_equal(fisher_positions(3, 100), [0, 1, 2])
    pos = fisher_positions(2000, 1000)
    assert pos.shape == (1000,)
    assert (np.diff(pos) > 0).all()
    assert pos[0] == 0 and pos[-1] < 2000
    with pytest.raises(ValueError):
        fisher_positions(0, 5)


def _random_task(n=100, vocab=7, seed=5):
    rng = Rng(seed)
    return Task("f", rng.integers(0, vocab, n), rng.integers(0, vocab, n),
                Vocabulary(list(range(vocab)))), rng


def naive_fisher(params, task, n_samples, window):
    """Window-by-window recomputation: thread the entry state with
    forward_sequence, then take each sampled step's squared gradient from
    its own single-sample kernel call on throwaway banks."""
    py = get_backend("python")
    pos = fisher_positions(len(task), n_samples)
    c = np.zeros(params.hidden)
    h = np.zeros(params.hidden)
    fish = np.zeros(params.n_params)
    for lo in range(0, len(task), window):
        ids = task.inputs[lo:lo + window]
        for p in pos[(pos >= lo) & (pos < lo + window)]:
            one = np.zeros(params.n_params)
            rows = np.zeros(ids.shape[0], dtype=np.int64)
            py.fisher_chunk(params.flat, one, params.vocab, params.input_dim,
                            params.hidden, ids, task.targets[lo:lo + window],
                            rows, c.reshape(1, -1).copy(), h.reshape(1, -1).copy(),
                            np.array([p - lo], dtype=np.int64))
            fish += one
        _, c, h = forward_sequence(params, ids, c, h)
    return fish / pos.shape[0]


def test_estimate_fisher_matches_naive_recomputation():
    task, rng = _random_task()
    params = LstmParams(7, 4, 5)
    params.init(rng.child("init"))
    got = estimate_fisher(params, task, n_samples=25, window=16)
    want = naive_fisher(params, task, n_samples=25, window=16)
    assert np.all(got >= 0.0)
    assert got.max() > 0.0
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_fisher_single_step_closed_form():
    # one-step stream, zero weights: logits are zero, probs uniform, and
    # the only nonzero gradients sit in the readout: b_out = p - onehot,
    # W_out = 0 because h is zero everywhere at zero weights.
    V, D, H = 3, 2, 2
    params = LstmParams(V, D, H)
    task = Task("one", np.array([1]), np.array([2]), Vocabulary([0, 1, 2]))
    fish = estimate_fisher(params, task, n_samples=1)
    view = LstmParams(V, D, H, fish)
    p = 1.0 / 3.0
    np.testing.assert_allclose(view.b_out, [p * p, p * p, (1 - p) ** 2],
                               rtol=1e-14)
    assert view.W_out.max() == 0.0
    assert view.Wx.max() == 0.0 and view.embed.max() == 0.0


def test_penalty_quadratic_closed_form():
    pen = EwcPenalty(2, lam=1.0)
    pen._sf[:] = [2.0, 0.0]
    anchor = np.array([1.0, -3.0])
    pen._sft[:] = pen._sf * anchor
    pen._sftt[:] = pen._sf * anchor * anchor
    pen.n_anchors = 1
    theta = anchor + np.array([0.5, 10.0])
    # value 0.5*lam*F*delta^2, gradient lam*F*delta; zero-Fisher coordinate free
    assert pen.penalty(theta) == pytest.approx(0.25, rel=1e-14)
    grad = np.zeros(2)
    pen.add_grad(theta, grad)
    np.testing.assert_allclose(grad, [1.0, 0.0], rtol=1e-14)
    assert pen.penalty(anchor) == pytest.approx(0.0, abs=1e-12)


def test_penalty_accumulates_anchors():
    task, rng = _random_task(n=60, vocab=5, seed=11)
    params = LstmParams(5, 3, 4)
    params.init(rng.child("init"))
    pen = EwcPenalty(params.n_params, lam=7.0, fisher_samples=10)

    f1 = estimate_fisher(params, task, n_samples=10)
    t1 = params.flat.copy()
    pen.consolidate(params, task)

    params.flat += rng.normal(params.n_params) * 0.1
    f2 = estimate_fisher(params, task, n_samples=10)
    t2 = params.flat.copy()
    pen.consolidate(params, task)
    assert pen.n_anchors == 2

    theta = t2 + rng.normal(params.n_params) * 0.05
    want = 0.5 * 7.0 * float((f1 * (theta - t1) ** 2 + f2 * (theta - t2) ** 2).sum())
    assert pen.penalty(theta) == pytest.approx(want, rel=1e-9)

    grad = np.zeros(params.n_params)
    pen.add_grad(theta, grad)
    want_grad = 7.0 * (f1 * (theta - t1) + f2 * (theta - t2))
    np.testing.assert_allclose(grad, want_grad, rtol=1e-9, atol=1e-12)


def test_add_grad_matches_value_by_finite_differences():
    task, rng = _random_task(n=40, vocab=5, seed=3)
    params = LstmParams(5, 3, 4)
    params.init(rng.child("init"))
    pen = EwcPenalty(params.n_params, lam=2.5, fisher_samples=8)
    pen.consolidate(params, task)
    theta = params.flat + rng.normal(params.n_params) * 0.1
    grad = np.zeros(params.n_params)
    pen.add_grad(theta, grad)
    for j in rng.integers(0, params.n_params, 10).tolist():
        step = 1e-6 * max(1.0, abs(theta[j]))
        tp = theta.copy(); tp[j] += step
        tm = theta.copy(); tm[j] -= step
        fd = (pen.penalty(tp) - pen.penalty(tm)) / (2 * step)
        assert grad[j] == pytest.approx(fd, rel=1e-6, abs=1e-10)


def test_lambda_zero_is_identity():
    task, rng = _random_task(n=64, vocab=5, seed=9)
    params_a = LstmParams(5, 4, 6)
    params_a.init(Rng(21).child("init"))
    params_b = params_a.copy()

    pen = EwcPenalty(params_b.n_params, lam=0.0, fisher_samples=5)
    pen.consolidate(params_b, task)

    ta = Trainer(params_a, make_policy("task"))
    tb = Trainer(params_b, make_policy("task"), penalty=pen)
    ra = ta.train_pass(task)
    rb = tb.train_pass(task)
    assert ra == rb
    assert params_a.flat.tobytes() == params_b.flat.tobytes()


def test_lambda_validation():
    with pytest.raises(ValueError):
        EwcPenalty(4, lam=-1.0)
