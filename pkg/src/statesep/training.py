"""Optimizer and the chunked training loop.

Training walks a task stream in fixed-size windows (chunks). Within a
chunk, backprop is exact; across chunk boundaries state is carried through
the state bank with no gradient flow (truncated backprop through time).
Every chunk ends with one Adam step on the gradient of that chunk's mean
cross-entropy, plus any quadratic penalty in force.
"""
from __future__ import annotations

import numpy as np

from . import backend as default_backend
from .lstm import LstmParams
from .states import Policy, StateStore

__all__ = ["Adam", "Trainer", "DEFAULT_WINDOW"]

DEFAULT_WINDOW = 32


class Adam(object):
    """Adam with bias correction; epsilon sits outside the square root.

    The first step from zero moment estimates moves every coordinate by
    lr * g / (|g| + eps) regardless of gradient scale.
    """

    def __init__(self, n: int, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n, dtype=np.float64)
        self.v = np.zeros(n, dtype=np.float64)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        """Update ``theta`` in place from ``grad``."""
        if theta.shape != self.m.shape or grad.shape != self.m.shape:
            raise ValueError("parameter/gradient size does not match optimizer state")
        self.t += 1
        self.m += (1.0 - self.beta1) * (grad - self.m)
        self.v += (1.0 - self.beta2) * (grad * grad - self.v)
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class Trainer:
    """Runs passes over task streams under one state policy.

    Holds the parameters, the state bank, one Adam instance (optimizer
    moments persist across tasks and passes) and an optional quadratic
    penalty provider with an ``add_grad(theta, grad)`` method.
    """

    def __init__(self, params: LstmParams, policy: Policy,
                 store: StateStore | None = None,
                 window: int = DEFAULT_WINDOW,
                 lr: float = 0.001,
                 penalty=None,
                 kernel=None):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.params = params
        self.policy = policy
        self.store = store if store is not None else StateStore(params.hidden)
        self.window = window
        self.adam = Adam(params.n_params, lr=lr)
        self.penalty = penalty
        self.kernel = kernel if kernel is not None else default_backend
        self._grad = np.zeros(params.n_params, dtype=np.float64)

    def chunks(self, task):
        """Yield (ids, targets, bank_rows) windows covering the stream."""
        inputs = np.ascontiguousarray(task.inputs, dtype=np.int64)
        targets = np.ascontiguousarray(task.targets, dtype=np.int64)
        if inputs.shape != targets.shape:
            raise ValueError("inputs and targets must have equal length")
        for lo in range(0, inputs.shape[0], self.window):
            ids = inputs[lo:lo + self.window]
            tgt = targets[lo:lo + self.window]
            keys = self.policy.keys_for(task.task_id, ids)
            rows = self.store.rows_for(keys)
            yield ids, tgt, rows

    def train_pass(self, task):
        """One full pass over a task stream. Returns (mean_loss, accuracy)
        aggregated over all steps of the pass."""
        p = self.params
        loss_sum = 0.0
        n_correct = 0
        n_steps = 0
        for ids, tgt, rows in self.chunks(task):
            c_bank, h_bank = self.store.banks()
            ls, nc = self.kernel.train_chunk(
                p.flat, self._grad, p.vocab, p.input_dim, p.hidden,
                ids, tgt, rows, c_bank, h_bank)
            if self.penalty is not None:
                self.penalty.add_grad(p.flat, self._grad)
            self.adam.step(p.flat, self._grad)
            loss_sum += ls
            n_correct += nc
            n_steps += ids.shape[0]
        return loss_sum / n_steps, n_correct / n_steps

    def evaluate(self, task, preserve_store: bool = True):
        """Frozen-weight pass over a task stream. Returns (mean_loss,
        accuracy). By default the state bank is rolled back afterwards so
        evaluation leaves no trace."""
        p = self.params
        snap = self.store.snapshot() if preserve_store else None
        loss_sum = 0.0
        n_correct = 0
        n_steps = 0
        for ids, tgt, rows in self.chunks(task):
            c_bank, h_bank = self.store.banks()
            ls, nc = self.kernel.eval_chunk(
                p.flat, p.vocab, p.input_dim, p.hidden,
                ids, tgt, rows, c_bank, h_bank)
            loss_sum += ls
            n_correct += nc
            n_steps += ids.shape[0]
        if snap is not None:
            self.store.restore(snap)
        return loss_sum / n_steps, n_correct / n_steps
