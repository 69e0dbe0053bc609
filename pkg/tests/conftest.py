import numpy as np
import pytest

from statesep.lstm import LstmParams
from statesep.numerics import Rng


def tiny_params(vocab=5, input_dim=4, hidden=8, seed=0, forget_bias=0.0):
    p = LstmParams(vocab, input_dim, hidden)
    p.init(Rng(seed).child("init"), forget_bias=forget_bias)
    return p


@pytest.fixture
def params():
    return tiny_params()


@pytest.fixture
def rng():
    return Rng(1234)


def random_ids(rng: Rng, n: int, vocab: int) -> np.ndarray:
    return rng.integers(0, vocab, (n,)).astype(np.int64)
