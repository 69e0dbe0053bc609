"""Dense numeric primitives shared by every other module.

Vectors and matrices are plain float64 numpy arrays (1-D and 2-D,
C-contiguous, row-major). All randomness flows through :class:`Rng`, a thin
wrapper around numpy's PCG64, so every draw is reproducible from a single
integer seed on any platform.
"""
from __future__ import annotations

import zlib

import numpy as np

__all__ = [
    "Rng",
    "matvec",
    "sigmoid",
    "tanh",
    "softmax",
    "log_sum_exp",
    "init_xavier",
    "init_uniform",
]


class Rng:
    """Deterministic random stream: same seed, same draws, everywhere.

    Substreams created with :meth:`child` are independent of the parent and
    of each other, and depend only on (seed, tag path), never on draw order.
    A stream has a single owner; it is never shared between experiments.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int, _entropy: tuple[int, ...] | None = None):
        self.seed = int(seed)
        self._entropy = tuple(_entropy) if _entropy is not None else (self.seed,)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self._entropy))
        )

    def child(self, tag) -> "Rng":
        """Independent substream derived from this stream's seed and a tag."""
        return Rng(self.seed, self._entropy + (zlib.crc32(str(tag).encode()),))

    def normal(self, shape=None) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, lo: float, hi: float, shape=None) -> np.ndarray:
        return self._gen.uniform(lo, hi, shape)

    def integers(self, lo: int, hi: int, shape=None) -> np.ndarray:
        return self._gen.integers(lo, hi, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with an explicit dimension check."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1:
        raise ValueError(f"matvec expects a 2-D matrix and 1-D vector, got {m.ndim}-D and {v.ndim}-D")
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: matrix is {m.shape[0]}x{m.shape[1]}, vector has length {v.shape[0]}")
    return m @ v


def sigmoid(v) -> np.ndarray:
    """Elementwise logistic function, overflow-safe on both tails."""
    v = np.asarray(v, dtype=np.float64)
    t = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def tanh(v) -> np.ndarray:
    return np.tanh(np.asarray(v, dtype=np.float64))


def softmax(logits) -> np.ndarray:
    """Stable softmax: exponentials are taken after subtracting the max."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size < 1:
        raise ValueError("softmax needs at least one logit")
    e = np.exp(x - x.max())
    return e / e.sum()


def log_sum_exp(logits) -> float:
    x = np.asarray(logits, dtype=np.float64)
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def init_xavier(shape: tuple[int, int], rng: Rng) -> np.ndarray:
    """Normal Xavier draw: zero mean, variance 2 / (fan_in + fan_out).

    fan_out is the row count and fan_in the column count (the matrix is
    applied as ``m @ x``). Gain is fixed at 1.
    """
    rows, cols = shape
    std = np.sqrt(2.0 / (rows + cols))
    return std * rng.normal((rows, cols))


def init_uniform(shape: tuple[int, int], lo: float, hi: float, rng: Rng) -> np.ndarray:
    """I.i.d. uniform draw over [lo, hi)."""
    if not lo < hi:
        raise ValueError(f"uniform init needs lo < hi, got lo={lo}, hi={hi}")
    return rng.uniform(lo, hi, shape)
