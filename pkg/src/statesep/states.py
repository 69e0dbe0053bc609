"""Keyed storage for LSTM cell state, and the policies that pick the keys.

The recurrent state of the model is a pair of vectors (c, h). Instead of one
global pair, the engine keeps a bank of pairs addressed by a key, and a
*policy* decides which key each step reads and writes:

    shared  one key for everything (ordinary LSTM behaviour)
    task    one key per task id; switching tasks switches state
    label   one key per input symbol; each symbol carries its own state

Unseen keys read as zeros, so a fresh key always starts from the zero state.
"""
from __future__ import annotations

import numpy as np

__all__ = ["StateStore", "Policy", "SharedPolicy", "PerTaskPolicy",
           "PerLabelPolicy", "make_policy", "POLICY_NAMES"]


class StateStore:
    """Growable bank of (c, h) state pairs addressed by hashable keys.

    Rows are allocated on first touch and never freed; ``snapshot`` and
    ``restore`` give cheap save/rollback so evaluations can run without
    disturbing training state.
    """

    def __init__(self, hidden: int, capacity: int = 8):
        if hidden < 1:
            raise ValueError("hidden must be >= 1")
        self.hidden = hidden
        self._index: dict = {}
        self._c = np.zeros((capacity, hidden), dtype=np.float64)
        self._h = np.zeros((capacity, hidden), dtype=np.float64)

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key) -> bool:
        return key in self._index

    def keys(self):
        return self._index.keys()

    def _grow(self, need: int) -> None:
        cap = self._c.shape[0]
        while cap < need:
            cap *= 2
        if cap > self._c.shape[0]:
            c = np.zeros((cap, self.hidden), dtype=np.float64)
            h = np.zeros((cap, self.hidden), dtype=np.float64)
            c[:self._c.shape[0]] = self._c
            h[:self._h.shape[0]] = self._h
            self._c, self._h = c, h

    def row(self, key) -> int:
        """Bank row for a key, allocating a zeroed row on first touch."""
        r = self._index.get(key)
        if r is None:
            r = len(self._index)
            self._grow(r + 1)
            self._index[key] = r
        return r

    def rows_for(self, keys) -> np.ndarray:
        """Vector of bank rows for a key sequence (allocating as needed)."""
        return np.fromiter((self.row(k) for k in keys), dtype=np.int64,
                           count=len(keys))

    def fetch(self, key):
        """Copies of (c, h) under a key; zeros if the key is unseen."""
        r = self._index.get(key)
        if r is None:
            z = np.zeros(self.hidden, dtype=np.float64)
            return z, z.copy()
        return self._c[r].copy(), self._h[r].copy()

    def commit(self, key, c: np.ndarray, h: np.ndarray) -> None:
        """Store (c, h) under a key, allocating the row if needed."""
        c = np.asarray(c, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        if c.shape != (self.hidden,) or h.shape != (self.hidden,):
            raise ValueError(f"state vectors must have shape ({self.hidden},)")
        r = self.row(key)
        self._c[r] = c
        self._h[r] = h

    def banks(self):
        """The live (c, h) arrays, truncated to allocated rows.

        Mutating the returned views writes through to the store; the hot
        training path uses this to commit states in bulk.
        """
        n = len(self._index)
        return self._c[:n], self._h[:n]

    def reset(self) -> None:
        """Drop every key; the store reads as all zeros again."""
        self._index.clear()
        self._c[:] = 0.0
        self._h[:] = 0.0

    def snapshot(self) -> dict:
        n = len(self._index)
        return {"index": dict(self._index), "c": self._c[:n].copy(),
                "h": self._h[:n].copy()}

    def restore(self, snap: dict) -> None:
        self._index = dict(snap["index"])
        n = len(self._index)
        self._c[:] = 0.0
        self._h[:] = 0.0
        self._grow(n)
        self._c[:n] = snap["c"]
        self._h[:n] = snap["h"]


class Policy:
    """Maps each step of a task's stream to the state key it uses."""

    name = "?"

    def key_for(self, task_id: str, symbol: int):
        raise NotImplementedError

    def keys_for(self, task_id: str, symbols: np.ndarray) -> list:
        return [self.key_for(task_id, int(s)) for s in symbols]


class SharedPolicy(Policy):
    """Every step of every task reads and writes the single key None."""

    name = "shared"

    def key_for(self, task_id: str, symbol: int):
        return None


class PerTaskPolicy(Policy):
    """All steps of one task share a key; distinct tasks never collide."""

    name = "task"

    def key_for(self, task_id: str, symbol: int):
        return str(task_id)


class PerLabelPolicy(Policy):
    """The current input symbol is the key: the state read before
    processing symbol s, and the state written after, both live under s."""

    name = "label"

    def key_for(self, task_id: str, symbol: int):
        return int(symbol)


POLICY_NAMES = ("shared", "task", "label")


def make_policy(name: str) -> Policy:
    try:
        cls = {"shared": SharedPolicy, "task": PerTaskPolicy,
               "label": PerLabelPolicy}[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")
    return cls()
