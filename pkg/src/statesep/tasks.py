"""Synthetic next-symbol prediction tasks over delta alphabets.

A task is a stream of symbol ids where the model must predict each next
symbol from the current one. Streams come from repeating delta patterns
(the continual-learning pairs), families of single-delta tasks, seeded
pseudorandom sequences over a large alphabet, delta-encoded address
traces, and whitespace-tokenized text.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng

__all__ = [
    "Vocabulary", "Task", "PatternSpec", "make_pattern_task", "named_pair",
    "PAIR_NAMES", "scalability_suite", "pseudorandom_pair",
    "deltas_from_addresses", "tokens_from_text", "save_task", "load_task",
    "load_addresses", "DEFAULT_TASK_LEN",
]

DEFAULT_TASK_LEN = 10_000


class Vocabulary:
    """Insertion-ordered bijection between symbol strings and dense ids."""

    def __init__(self, symbols=()):
        self._sym_to_id: dict[str, int] = {}
        self._syms: list[str] = []
        for s in symbols:
            self.add(s)

    def __len__(self) -> int:
        return len(self._syms)

    def __contains__(self, symbol) -> bool:
        return str(symbol) in self._sym_to_id

    def add(self, symbol) -> int:
        """Id of a symbol, registering it if unseen."""
        s = str(symbol)
        sid = self._sym_to_id.get(s)
        if sid is None:
            sid = len(self._syms)
            self._sym_to_id[s] = sid
            self._syms.append(s)
        return sid

    def id_of(self, symbol) -> int:
        s = str(symbol)
        if s not in self._sym_to_id:
            raise KeyError(f"symbol {s!r} not in vocabulary")
        return self._sym_to_id[s]

    def symbol_of(self, sid: int) -> str:
        return self._syms[sid]

    def symbols(self) -> list[str]:
        return list(self._syms)

    def encode(self, symbols) -> np.ndarray:
        return np.array([self.add(s) for s in symbols], dtype=np.int64)

    def decode(self, ids) -> list[str]:
        return [self._syms[int(i)] for i in ids]


@dataclass
class Task:
    """One next-symbol stream: targets[k] = inputs[k+1], with the final
    target wrapping to whatever the generating pattern emits next."""

    task_id: str
    inputs: np.ndarray
    targets: np.ndarray
    vocab: Vocabulary = field(repr=False)

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.int64)
        self.targets = np.ascontiguousarray(self.targets, dtype=np.int64)
        if self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets must have equal length")
        if self.inputs.shape[0] and max(self.inputs.max(), self.targets.max()) >= len(self.vocab):
            raise ValueError("task contains ids outside its vocabulary")

    def __len__(self) -> int:
        return self.inputs.shape[0]


def _stream_task(task_id: str, stream_ids: np.ndarray, vocab: Vocabulary) -> Task:
    """Task from a raw id stream of length n+1: inputs are the first n
    symbols, targets the last n."""
    stream_ids = np.asarray(stream_ids, dtype=np.int64)
    if stream_ids.shape[0] < 2:
        raise ValueError("stream must contain at least two symbols")
    return Task(task_id, stream_ids[:-1], stream_ids[1:], vocab)


@dataclass
class PatternSpec:
    """A base delta pattern and the stream length it is tiled to."""

    base_pattern: tuple
    total_length: int = DEFAULT_TASK_LEN

    def __post_init__(self):
        self.base_pattern = tuple(int(d) for d in self.base_pattern)
        if not self.base_pattern:
            raise ValueError("base_pattern must be nonempty")
        if self.total_length < len(self.base_pattern):
            raise ValueError("total_length must be >= pattern length")


def _delta_symbols(deltas) -> list[str]:
    return [f"{int(d):+d}" for d in deltas]


def make_pattern_task(spec: PatternSpec, vocab: Vocabulary,
                      task_id: str | None = None) -> Task:
    """Tile a delta pattern into a next-symbol task.

    The pattern conceptually repeats forever, so the final step's target is
    the symbol the next repetition would start with.
    """
    base = vocab.encode(_delta_symbols(spec.base_pattern))
    n = spec.total_length
    reps = -(-(n + 1) // base.shape[0])
    stream = np.tile(base, reps)[:n + 1]
    if task_id is None:
        task_id = ",".join(_delta_symbols(spec.base_pattern))
    return _stream_task(task_id, stream, vocab)


def _runs(*pairs) -> tuple:
    """Expand ((delta, count), ...) into a flat pattern tuple."""
    out = []
    for d, c in pairs:
        out.extend([d] * c)
    return tuple(out)


PAIR_NAMES = ("same_delta_diff_freq", "one_extra_delta",
              "diff_delta_same_freq", "diff_delta_diff_freq")


def named_pair(name: str, total_length: int = DEFAULT_TASK_LEN,
               n_extra: int = 1, seven_threes: bool = False,
               vocab: Vocabulary | None = None):
    """The canonical continual-learning task pairs.

    Patterns (each repeated to ``total_length``):

        same_delta_diff_freq   T1 = 2x(+2), 3x(-3)   T2 = 5x(+2), 8x(-3)
        one_extra_delta        T1 = 2x(+2), 3x(-3)   T2 = T1 then n_extra x(+7)
        diff_delta_same_freq   T1 = 2x(+2), 3x(-3)   T2 = 2x(-7), 3x(+5)
        diff_delta_diff_freq   T1 = 5x(+2), 8x(-3)   T2 = 2x(-7), 3x(+5)

    ``seven_threes`` switches the first pair's T2 to 7 trailing -3's (both
    frequency variants circulate for that pair). Returns (T1, T2) sharing
    one vocabulary.
    """
    base = _runs((+2, 2), (-3, 3))
    wide = _runs((+2, 5), (-3, 7 if seven_threes else 8))
    other = _runs((-7, 2), (+5, 3))
    if name == "same_delta_diff_freq":
        p1, p2 = base, wide
    elif name == "one_extra_delta":
        if not 1 <= n_extra <= 5:
            raise ValueError("n_extra must be in 1..5")
        p1, p2 = base, base + _runs((+7, n_extra))
    elif name == "diff_delta_same_freq":
        p1, p2 = base, other
    elif name == "diff_delta_diff_freq":
        p1, p2 = wide, other
    else:
        raise ValueError(f"unknown pair {name!r}; valid names: {', '.join(PAIR_NAMES)}")
    vocab = vocab if vocab is not None else Vocabulary()
    t1 = make_pattern_task(PatternSpec(p1, total_length), vocab, task_id="T1")
    t2 = make_pattern_task(PatternSpec(p2, total_length), vocab, task_id="T2")
    return t1, t2


def scalability_suite(n_tasks: int, rng: Rng,
                      total_length: int = DEFAULT_TASK_LEN,
                      vocab: Vocabulary | None = None) -> list[Task]:
    """n constant tasks, each one distinct delta repeated for the whole
    stream (every target equals the input)."""
    if n_tasks < 2:
        raise ValueError("n_tasks must be >= 2")
    pool = []
    for k in range(1, n_tasks + 1):
        pool.extend([+k, -k])
    order = rng.child("suite").permutation(len(pool))
    deltas = [pool[i] for i in order[:n_tasks]]
    vocab = vocab if vocab is not None else Vocabulary()
    return [make_pattern_task(PatternSpec((d,), total_length), vocab,
                              task_id=f"S{j + 1}")
            for j, d in enumerate(deltas)]


def pseudorandom_pair(vocab_size: int = 1000, task_len: int = 2000,
                      rng: Rng | None = None, base_symbols: int = 250,
                      repeats: int = 1, overlap: float = 0.0,
                      vocab: Vocabulary | None = None):
    """Two tasks of pseudorandom deltas over one large shared alphabet.

    Each task owns a fixed random base sequence (``base_symbols`` distinct
    symbols, each occurring ``repeats`` times in shuffled order) tiled to
    ``task_len``, so the stream is irregular yet memorizable. With the
    default ``repeats=1`` every symbol has a single fixed successor, which
    a symbol-keyed state can memorize; higher repeat counts make the
    successor depend on occurrence position, which symbol-keyed states
    cannot represent (each converges to a per-symbol constant). ``overlap``
    is the fraction of the second task's symbol set reused from the first;
    the default keeps the sets disjoint, which is what lets symbol-keyed
    state separation protect the first task while coarser separation still
    fails.
    """
    if rng is None:
        raise ValueError("pseudorandom_pair needs an rng")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError("overlap must be in [0, 1]")
    if 2 * base_symbols - int(round(overlap * base_symbols)) > vocab_size:
        raise ValueError("alphabet too small for two subsets at this overlap")
    labels = rng.child("alphabet").permutation(10 ** 6)[:vocab_size]
    vocab = vocab if vocab is not None else Vocabulary()
    ids = vocab.encode(labels)
    split = rng.child("split").permutation(vocab_size)
    m = base_symbols
    n_shared = int(round(overlap * m))
    set1 = ids[split[:m]]
    set2 = np.concatenate([set1[:n_shared], ids[split[m:2 * m - n_shared]]])

    def one(tag: str, symbol_ids: np.ndarray) -> Task:
        mult = np.repeat(symbol_ids, repeats)
        order = rng.child(f"pattern-{tag}").permutation(mult.shape[0])
        base = mult[order]
        reps = -(-(task_len + 1) // base.shape[0])
        stream = np.tile(base, reps)[:task_len + 1]
        return _stream_task(tag, stream, vocab)

    return one("T1", set1), one("T2", set2)


def deltas_from_addresses(addresses, vocab: Vocabulary,
                          task_id: str = "trace") -> Task:
    """Delta-encode an address stream into a next-delta task."""
    addr = np.asarray(list(addresses), dtype=np.int64)
    if addr.shape[0] < 2:
        raise ValueError("need at least 2 addresses to form deltas")
    deltas = np.diff(addr)
    stream = vocab.encode(_delta_symbols(deltas))
    if stream.shape[0] < 2:
        raise ValueError("need at least 3 addresses to form a prediction step")
    return _stream_task(task_id, stream, vocab)


def tokens_from_text(text: str, vocab: Vocabulary,
                     task_id: str = "text") -> Task:
    """Whitespace-tokenized next-word task over a growing vocabulary."""
    toks = text.split()
    if len(toks) < 2:
        raise ValueError("text must contain at least two tokens")
    return _stream_task(task_id, vocab.encode(toks), vocab)


def save_task(path, task: Task) -> None:
    """Write a task as its symbol stream: a header line with the task id,
    then one symbol per line (inputs followed by the final target)."""
    stream = np.concatenate([task.inputs, task.targets[-1:]])
    with open(path, "w") as fh:
        fh.write(f"task: {task.task_id}\n")
        for sid in stream:
            fh.write(task.vocab.symbol_of(int(sid)) + "\n")


def load_task(path, vocab: Vocabulary) -> Task:
    """Read a task written by save_task."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("task:"):
        raise ValueError(f"{path}: missing 'task:' header line")
    task_id = lines[0][len("task:"):].strip()
    if len(lines) < 3:
        raise ValueError(f"{path}: stream too short")
    return _stream_task(task_id, vocab.encode(lines[1:]), vocab)


def load_addresses(path) -> list[int]:
    """Read one decimal or hex (0x...) address per line."""
    out = []
    with open(path) as fh:
        for ln in fh:
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            out.append(int(s, 16) if s.lower().startswith("0x") else int(s, 10))
    return out
