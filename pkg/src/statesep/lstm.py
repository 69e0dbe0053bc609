"""Single-layer LSTM over a symbol alphabet, stored in one flat buffer.

The model reads a symbol id, embeds it, runs one LSTM cell update and emits
next-symbol logits through a linear readout. All parameters live in a single
contiguous float64 vector so that optimizers, penalties and checkpoints can
treat the model as one flat array; named views expose the individual
matrices without copying.

Buffer layout, in order:

    embed   (V, D)   symbol embedding table
    Wx      (4H, D)  input weights, gate rows stacked f, i, g, o
    Wh      (4H, H)  recurrent weights, same stacking
    b       (4H,)    gate biases, same stacking
    W_out   (V, H)   readout weights
    b_out   (V,)     readout biases

Gate semantics: f = forget, i = input, g = candidate cell value (tanh),
o = output. The cell update is

    c = f * c_prev + i * g
    h = o * tanh(c)
"""
from __future__ import annotations

import numpy as np

from .numerics import Rng, init_uniform, init_xavier, sigmoid, softmax

__all__ = [
    "LstmParams",
    "DEFAULT_FORGET_BIAS",
    "cell_step",
    "step_logits",
    "forward_sequence",
    "cross_entropy",
    "sequence_loss_accuracy",
]

GATES = ("f", "i", "g", "o")

# Default forget-gate bias for experiment runs. Positive values start the
# cell with long memory, which the retention contrasts depend on; plain
# LstmParams.init stays neutral (0.0) so the primitive carries no policy.
DEFAULT_FORGET_BIAS = 4.0


class LstmParams:
    """Flat float64 parameter vector with named matrix views.

    Every view aliases ``self.flat``, so in-place updates through either
    side are visible through the other. ``copy()`` and ``like()`` preserve
    the geometry.
    """

    def __init__(self, vocab: int, input_dim: int, hidden: int,
                 flat: np.ndarray | None = None):
        if min(vocab, input_dim, hidden) < 1:
            raise ValueError("vocab, input_dim and hidden must all be >= 1")
        self.vocab = vocab
        self.input_dim = input_dim
        self.hidden = hidden
        V, D, H = vocab, input_dim, hidden
        sizes = [V * D, 4 * H * D, 4 * H * H, 4 * H, V * H, V]
        total = sum(sizes)
        if flat is None:
            flat = np.zeros(total, dtype=np.float64)
        else:
            flat = np.ascontiguousarray(flat, dtype=np.float64)
            if flat.shape != (total,):
                raise ValueError(f"flat buffer must have shape ({total},), got {flat.shape}")
        self.flat = flat
        offs = np.cumsum([0] + sizes)
        self.embed = flat[offs[0]:offs[1]].reshape(V, D)
        self.Wx = flat[offs[1]:offs[2]].reshape(4 * H, D)
        self.Wh = flat[offs[2]:offs[3]].reshape(4 * H, H)
        self.b = flat[offs[3]:offs[4]]
        self.W_out = flat[offs[4]:offs[5]].reshape(V, H)
        self.b_out = flat[offs[5]:offs[6]]

    @property
    def n_params(self) -> int:
        return self.flat.shape[0]

    def gate_rows(self, gate: str) -> slice:
        """Row slice of Wx/Wh/b belonging to one gate ('f', 'i', 'g', 'o')."""
        k = GATES.index(gate)
        H = self.hidden
        return slice(k * H, (k + 1) * H)

    def gate_view(self, which: str, gate: str):
        """Named view, e.g. gate_view('Wx', 'f') is the forget input matrix."""
        rows = self.gate_rows(gate)
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b}[which][rows]

    def init(self, rng: Rng, scheme: str = "xavier", forget_bias: float = 0.0) -> None:
        """Draw fresh weights in place. Biases start at zero except the
        forget gate, which gets ``forget_bias``."""
        mats = [self.embed, self.Wx, self.Wh, self.W_out]
        tags = ["embed", "wx", "wh", "w_out"]
        for m, tag in zip(mats, tags):
            r = rng.child(tag)
            if scheme == "xavier":
                m[:] = init_xavier(m.shape, r)
            elif scheme == "uniform":
                m[:] = init_uniform(m.shape, -1.0, 1.0, r)
            else:
                raise ValueError(f"unknown init scheme {scheme!r}")
        self.b[:] = 0.0
        self.b[self.gate_rows("f")] = forget_bias
        self.b_out[:] = 0.0

    def copy(self) -> "LstmParams":
        return LstmParams(self.vocab, self.input_dim, self.hidden, self.flat.copy())

    def like(self, fill: float = 0.0) -> "LstmParams":
        """New parameter set of identical geometry, filled with a constant."""
        out = LstmParams(self.vocab, self.input_dim, self.hidden)
        if fill:
            out.flat[:] = fill
        return out

    def __repr__(self) -> str:
        return (f"LstmParams(vocab={self.vocab}, input_dim={self.input_dim}, "
                f"hidden={self.hidden}, n_params={self.n_params})")


def cell_step(params: LstmParams, x: np.ndarray, c_prev: np.ndarray,
              h_prev: np.ndarray):
    """One cell update on an already-embedded input vector.

    Returns ``(c, h, gates)`` with ``gates = (f, i, g, o)``. Pure function:
    nothing is mutated.
    """
    H = params.hidden
    a = params.Wx @ x + params.Wh @ h_prev + params.b
    f = sigmoid(a[0 * H:1 * H])
    i = sigmoid(a[1 * H:2 * H])
    g = np.tanh(a[2 * H:3 * H])
    o = sigmoid(a[3 * H:4 * H])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return c, h, (f, i, g, o)


def step_logits(params: LstmParams, h: np.ndarray) -> np.ndarray:
    return params.W_out @ h + params.b_out


def forward_sequence(params: LstmParams, ids: np.ndarray,
                     c0: np.ndarray | None = None,
                     h0: np.ndarray | None = None):
    """Run a symbol sequence through the cell with one carried state.

    Returns ``(logits, c_final, h_final)`` where ``logits`` has shape
    (len(ids), vocab). The initial state defaults to zeros.
    """
    H, V = params.hidden, params.vocab
    c = np.zeros(H) if c0 is None else np.array(c0, dtype=np.float64)
    h = np.zeros(H) if h0 is None else np.array(h0, dtype=np.float64)
    ids = np.asarray(ids)
    logits = np.empty((ids.shape[0], V), dtype=np.float64)
    for k, sym in enumerate(ids):
        c, h, _ = cell_step(params, params.embed[sym], c, h)
        logits[k] = step_logits(params, h)
    return logits, c, h


def cross_entropy(logits: np.ndarray, target: int) -> float:
    """Softmax cross-entropy of one prediction against an integer target."""
    p = softmax(logits)
    return float(-np.log(p[target]))


def sequence_loss_accuracy(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy and argmax accuracy over a batch of steps."""
    targets = np.asarray(targets)
    if logits.shape[0] != targets.shape[0]:
        raise ValueError("logits and targets disagree on step count")
    x = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(x).sum(axis=1))
    picked = x[np.arange(targets.shape[0]), targets]
    loss = float((lse - picked).mean())
    acc = float((logits.argmax(axis=1) == targets).mean())
    return loss, acc
