"""Numpy training, evaluation and Fisher kernels (reference backend).

A compiled backend with identical semantics lives in ``statesep._kernel``
and is preferred when available; ``statesep.backend`` picks one at import.
Both backends expose the same three chunk-level entry points.

A *chunk* is a contiguous window of a task stream. Gradients flow only
within the chunk: each step reads its entry state either from the output
of an earlier step in the same chunk that used the same state key (a live
graph edge) or from the state bank (a constant). After the chunk, the bank
row of every key touched holds the last state written under it, which is
how state threads across chunk boundaries without gradient flow.

The per-step predecessor array ``pred`` encodes the live edges: it covers
the ordinary stacked unrolling (all keys equal gives pred[k] = k - 1) and
keyed separation (per task or per input symbol) in one scheme.
"""
from __future__ import annotations

import numpy as np

from .lstm import LstmParams, cell_step, step_logits

__all__ = ["train_chunk", "eval_chunk", "fisher_chunk", "BACKEND"]

BACKEND = "python"


def _pred_chain(rows: np.ndarray) -> np.ndarray:
    """Previous step in the chunk using the same bank row, else -1."""
    pred = np.empty(rows.shape[0], dtype=np.int64)
    last: dict = {}
    for k, r in enumerate(rows.tolist()):
        pred[k] = last.get(r, -1)
        last[r] = k
    return pred


def _forward(p: LstmParams, ids, rows, c_bank, h_bank):
    """Run one chunk forward, keeping everything the backward pass needs.

    Deliberately reuses cell_step/step_logits so that a shared-key pass
    through the state bank is bit-identical to a plain threaded LSTM.
    """
    T = ids.shape[0]
    H = p.hidden
    pred = _pred_chain(rows)
    X = p.embed[ids]
    F = np.empty((T, H)); I = np.empty((T, H))
    G = np.empty((T, H)); O = np.empty((T, H))
    C = np.empty((T, H)); TC = np.empty((T, H)); Hs = np.empty((T, H))
    Cin = np.empty((T, H)); Hin = np.empty((T, H))
    logits = np.empty((T, p.vocab))
    for k in range(T):
        pk = pred[k]
        if pk >= 0:
            Cin[k] = C[pk]
            Hin[k] = Hs[pk]
        else:
            Cin[k] = c_bank[rows[k]]
            Hin[k] = h_bank[rows[k]]
        c, h, (f, i, g, o) = cell_step(p, X[k], Cin[k], Hin[k])
        F[k] = f; I[k] = i; G[k] = g; O[k] = o
        C[k] = c
        TC[k] = np.tanh(c)
        Hs[k] = h
        logits[k] = step_logits(p, h)
    return pred, X, F, I, G, O, C, TC, Hs, Cin, Hin, logits


def _loss_correct(logits, targets):
    x = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(x).sum(axis=1))
    idx = np.arange(targets.shape[0])
    loss_sum = float((lse - x[idx, targets]).sum())
    n_correct = int((logits.argmax(axis=1) == targets).sum())
    return loss_sum, n_correct


def _softmax_rows(logits):
    x = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=1, keepdims=True)


def _commit(rows, C, Hs, c_bank, h_bank):
    last: dict = {}
    for k, r in enumerate(rows.tolist()):
        last[r] = k
    for r, k in last.items():
        c_bank[r] = C[k]
        h_bank[r] = Hs[k]


def train_chunk(flat, grad, V, D, H, ids, targets, rows, c_bank, h_bank):
    """Forward and backward over one chunk.

    ``grad`` is overwritten with the gradient of the chunk's mean
    cross-entropy. The touched bank rows are updated to the chunk's exit
    states. Returns (summed cross-entropy, correct predictions).
    """
    p = LstmParams(V, D, H, flat)
    g = LstmParams(V, D, H, grad)
    T = ids.shape[0]
    pred, X, F, I, G, O, C, TC, Hs, Cin, Hin, logits = _forward(
        p, ids, rows, c_bank, h_bank)
    loss_sum, n_correct = _loss_correct(logits, targets)

    dlogits = _softmax_rows(logits)
    dlogits[np.arange(T), targets] -= 1.0
    dlogits /= T

    g.flat[:] = 0.0
    g.W_out[:] = dlogits.T @ Hs
    g.b_out[:] = dlogits.sum(axis=0)
    dH = dlogits @ p.W_out

    dA = np.empty((T, 4 * H))
    dh_acc = np.zeros((T, H))
    dc_acc = np.zeros((T, H))
    for k in range(T - 1, -1, -1):
        dh = dH[k] + dh_acc[k]
        dc = dc_acc[k] + dh * O[k] * (1.0 - TC[k] * TC[k])
        do = dh * TC[k]
        dA[k, 0 * H:1 * H] = dc * Cin[k] * F[k] * (1.0 - F[k])
        dA[k, 1 * H:2 * H] = dc * G[k] * I[k] * (1.0 - I[k])
        dA[k, 2 * H:3 * H] = dc * I[k] * (1.0 - G[k] * G[k])
        dA[k, 3 * H:4 * H] = do * O[k] * (1.0 - O[k])
        pk = pred[k]
        if pk >= 0:
            dh_acc[pk] += p.Wh.T @ dA[k]
            dc_acc[pk] += dc * F[k]

    g.Wx[:] = dA.T @ X
    g.Wh[:] = dA.T @ Hin
    g.b[:] = dA.sum(axis=0)
    np.add.at(g.embed, ids, dA @ p.Wx)

    _commit(rows, C, Hs, c_bank, h_bank)
    return loss_sum, n_correct


def eval_chunk(flat, V, D, H, ids, targets, rows, c_bank, h_bank):
    """Forward-only pass over one chunk; bank rows are updated as in
    training. Returns (summed cross-entropy, correct predictions)."""
    p = LstmParams(V, D, H, flat)
    _, _, _, _, _, _, C, _, Hs, _, _, logits = _forward(
        p, ids, rows, c_bank, h_bank)
    loss_sum, n_correct = _loss_correct(logits, targets)
    _commit(rows, C, Hs, c_bank, h_bank)
    return loss_sum, n_correct


def fisher_chunk(flat, fish, V, D, H, ids, targets, rows, c_bank, h_bank,
                 samples):
    """Accumulate squared log-likelihood gradients into ``fish``.

    For every chunk position listed in ``samples`` the gradient of the log
    probability of that step's target is backpropagated through the chunk
    (alone, not mixed with other steps) and its elementwise square is added
    to ``fish``. Bank rows are updated as in training so later chunks see
    the right entry states. Returns the number of samples processed.
    """
    p = LstmParams(V, D, H, flat)
    fview = LstmParams(V, D, H, fish)
    pred, X, F, I, G, O, C, TC, Hs, Cin, Hin, logits = _forward(
        p, ids, rows, c_bank, h_bank)
    probs = _softmax_rows(logits)
    H4 = 4 * H

    for s in samples.tolist():
        dlog = probs[s].copy()
        dlog[targets[s]] -= 1.0

        acc = LstmParams(V, D, H)
        acc.W_out[:] = np.outer(dlog, Hs[s])
        acc.b_out[:] = dlog
        dh = p.W_out.T @ dlog
        dc = np.zeros(H)
        k = s
        while k >= 0:
            dc = dc + dh * O[k] * (1.0 - TC[k] * TC[k])
            do = dh * TC[k]
            da = np.empty(H4)
            da[0 * H:1 * H] = dc * Cin[k] * F[k] * (1.0 - F[k])
            da[1 * H:2 * H] = dc * G[k] * I[k] * (1.0 - I[k])
            da[2 * H:3 * H] = dc * I[k] * (1.0 - G[k] * G[k])
            da[3 * H:4 * H] = do * O[k] * (1.0 - O[k])
            acc.Wx += np.outer(da, X[k])
            acc.Wh += np.outer(da, Hin[k])
            acc.b += da
            acc.embed[ids[k]] += p.Wx.T @ da
            dh = p.Wh.T @ da
            dc = dc * F[k]
            k = pred[k]
        fview.flat += acc.flat * acc.flat

    _commit(rows, C, Hs, c_bank, h_bank)
    return int(samples.shape[0])
