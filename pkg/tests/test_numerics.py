import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from statesep.numerics import (Rng, init_uniform, init_xavier, log_sum_exp,
                               matvec, sigmoid, softmax)


def test_sigmoid_closed_forms():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    assert sigmoid(np.array([2.0]))[0] == pytest.approx(1 / (1 + math.exp(-2)),
                                                        abs=1e-15)
    big = sigmoid(np.array([800.0, -800.0]))
    assert big[0] == 1.0 and big[1] == 0.0   # no overflow


def test_softmax_uniform_and_shift_invariance():
    p = softmax(np.zeros(4))
    assert np.allclose(p, 0.25, atol=1e-15)
    logits = np.array([1.0, 2.0, 3.0])
    assert np.allclose(softmax(logits), softmax(logits + 100.0), atol=1e-15)
    assert softmax(logits).sum() == pytest.approx(1.0, abs=1e-12)


def test_log_sum_exp_matches_direct():
    logits = np.array([1.0, 2.0, 3.0])
    assert log_sum_exp(logits) == pytest.approx(
        math.log(sum(math.exp(x) for x in logits)), abs=1e-12)
    assert log_sum_exp(np.array([1000.0, 1000.0])) == pytest.approx(
        1000.0 + math.log(2.0), abs=1e-9)


def test_matvec_matches_numpy():
    r = Rng(7)
    m = r.child("m").normal((6, 4))
    v = r.child("v").normal((4,))
    assert np.array_equal(matvec(m, v), m @ v)


def test_rng_repeatable_and_children_independent():
    a = Rng(42).child("x").normal((5,))
    b = Rng(42).child("x").normal((5,))
    c = Rng(42).child("y").normal((5,))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_child_path_not_draw_order():
    r1 = Rng(9)
    _ = r1.child("a").normal((3,))
    after = r1.child("b").normal((3,))
    fresh = Rng(9).child("b").normal((3,))
    assert np.array_equal(after, fresh)


@given(st.integers(min_value=0, max_value=2**31))
def test_rng_permutation_is_permutation(seed):
    p = Rng(seed).permutation(10)
    assert sorted(p.tolist()) == list(range(10))


def test_init_xavier_scale():
    w = init_xavier((200, 300), Rng(3).child("w"))
    std = math.sqrt(2.0 / (200 + 300))
    assert w.shape == (200, 300)
    assert w.std() == pytest.approx(std, rel=0.02)
    assert abs(w.mean()) < std / 10


def test_init_uniform_range():
    w = init_uniform((100, 100), -1.0, 1.0, Rng(4).child("w"))
    assert w.min() >= -1.0 and w.max() <= 1.0
    assert w.max() > 0.9 and w.min() < -0.9   # actually spans the range
