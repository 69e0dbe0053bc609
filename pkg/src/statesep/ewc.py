"""Elastic weight consolidation: diagonal Fisher estimate plus penalty.

After finishing a task, the trained weights are anchored: an empirical
diagonal Fisher is estimated on that task's stream and every later
gradient step pays lam * F * (theta - anchor) per anchor. Running sums
over anchors keep the cost of the penalty independent of how many tasks
have been consolidated.
"""
from __future__ import annotations

import numpy as np

from . import backend as default_backend
from .lstm import LstmParams
from .states import StateStore
from .training import DEFAULT_WINDOW

__all__ = ["fisher_positions", "estimate_fisher", "EwcPenalty",
           "DEFAULT_LAMBDA", "DEFAULT_FISHER_SAMPLES"]

DEFAULT_LAMBDA = 400.0
DEFAULT_FISHER_SAMPLES = 1000


def fisher_positions(total: int, n_samples: int) -> np.ndarray:
    """Evenly spaced, strictly increasing step indices used for the Fisher
    estimate: floor(i * total / n) for i = 0..n-1, with n capped at total."""
    if total < 1:
        raise ValueError("stream must have at least one step")
    n = min(n_samples, total)
    return (np.arange(n, dtype=np.int64) * total) // n


def estimate_fisher(params: LstmParams, task, n_samples: int = DEFAULT_FISHER_SAMPLES,
                    window: int = DEFAULT_WINDOW, kernel=None) -> np.ndarray:
    """Empirical diagonal Fisher of the model on one task stream.

    The stream is replayed with frozen weights and a single carried state
    (as in ordinary evaluation). At each sampled step the gradient of that
    step's target log-probability is taken through the enclosing backprop
    window, squared elementwise, and averaged over the samples.
    """
    kernel = kernel if kernel is not None else default_backend
    inputs = np.ascontiguousarray(task.inputs, dtype=np.int64)
    targets = np.ascontiguousarray(task.targets, dtype=np.int64)
    T = inputs.shape[0]
    pos = fisher_positions(T, n_samples)
    fish = np.zeros(params.n_params, dtype=np.float64)
    store = StateStore(params.hidden)
    row0 = store.row(None)
    for lo in range(0, T, window):
        hi = min(lo + window, T)
        rows = np.full(hi - lo, row0, dtype=np.int64)
        in_window = (pos >= lo) & (pos < hi)
        samples = np.ascontiguousarray(pos[in_window] - lo)
        c_bank, h_bank = store.banks()
        kernel.fisher_chunk(params.flat, fish, params.vocab, params.input_dim,
                            params.hidden, inputs[lo:hi], targets[lo:hi],
                            rows, c_bank, h_bank, samples)
    fish /= pos.shape[0]
    return fish


class EwcPenalty:
    """Accumulated quadratic penalty lam/2 * sum_a F_a * (theta - theta_a)^2.

    Only three running sums are kept (sum of F, of F*theta_a and of
    F*theta_a^2), so gradient and value cost O(n_params) however many
    anchors exist. Plugs into Trainer via ``add_grad``.
    """

    def __init__(self, n_params: int, lam: float = DEFAULT_LAMBDA,
                 fisher_samples: int = DEFAULT_FISHER_SAMPLES,
                 window: int = DEFAULT_WINDOW, kernel=None):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = lam
        self.fisher_samples = fisher_samples
        self.window = window
        self.kernel = kernel
        self.n_anchors = 0
        self._sf = np.zeros(n_params, dtype=np.float64)
        self._sft = np.zeros(n_params, dtype=np.float64)
        self._sftt = np.zeros(n_params, dtype=np.float64)

    def consolidate(self, params: LstmParams, task) -> None:
        """Anchor the current weights against forgetting of ``task``."""
        fish = estimate_fisher(params, task, self.fisher_samples,
                               self.window, self.kernel)
        theta = params.flat
        self._sf += fish
        self._sft += fish * theta
        self._sftt += fish * theta * theta
        self.n_anchors += 1

    def add_grad(self, theta: np.ndarray, grad: np.ndarray) -> None:
        """Add the penalty gradient lam * sum_a F_a * (theta - theta_a)."""
        if self.n_anchors:
            grad += self.lam * (self._sf * theta - self._sft)

    def penalty(self, theta: np.ndarray) -> float:
        """Current penalty value (for monitoring)."""
        q = self._sf * theta * theta - 2.0 * self._sft * theta + self._sftt
        return 0.5 * self.lam * float(q.sum())
