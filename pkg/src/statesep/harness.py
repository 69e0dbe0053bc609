"""Experiment protocols: pretrain/expose pairs, sequential task suites,
retention metrics and CSV emission.

Protocols:

    run_pair      pretrain on the first task, then repeatedly pass over
                  the second while evaluating both with frozen weights
                  after every pass (the forgetting experiments).
    run_sequence  train several tasks back to back (consolidating after
                  each when the method is ewc), then evaluate all of them
                  (the scalability and training-time experiments).
    run_single    train one task and evaluate it (smoke runs, text corpus).

All timing is process CPU time. Unless an experiment opts into timing,
every time column is written as 0.0 so that equal-seed runs produce
byte-identical CSVs.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .ewc import DEFAULT_FISHER_SAMPLES, DEFAULT_LAMBDA, EwcPenalty
from .lstm import DEFAULT_FORGET_BIAS, LstmParams
from .numerics import Rng
from .states import make_policy
from .tasks import Task
from .training import DEFAULT_WINDOW, Trainer

__all__ = ["ExperimentSpec", "MetricsRow", "run_pair", "run_sequence",
           "run_single", "forgetting_delta", "accuracy_series",
           "write_metrics_csv", "write_summary_csv",
           "CSV_HEADER", "SUMMARY_HEADER"]

CSV_HEADER = ("experiment", "phase", "eval_task", "iteration", "accuracy",
              "mean_loss", "wall_clock_s", "weight_delta_fro")
SUMMARY_HEADER = ("experiment", "n_tasks", "method", "policy",
                  "mean_final_accuracy", "total_train_s")


@dataclass
class ExperimentSpec:
    """Everything needed to run one experiment deterministically."""

    name: str
    tasks: list[Task]
    policy: str = "shared"
    method: str = "plain"
    init: str = "xavier"
    hidden: int = 64
    input_dim: int = 64
    pretrain_epochs: int = 50
    iterations: int = 30
    epochs_per_task: int | None = None
    eval_every: int = 1
    seed: int = 0
    window: int = DEFAULT_WINDOW
    lr: float = 0.001
    lam: float = DEFAULT_LAMBDA
    fisher_samples: int = DEFAULT_FISHER_SAMPLES
    forget_bias: float = DEFAULT_FORGET_BIAS
    timing: bool = False
    checkpoint: str | None = None

    def __post_init__(self):
        if not self.tasks:
            raise ValueError("an experiment needs at least one task")
        if self.method not in ("plain", "ewc"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.init not in ("xavier", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.pretrain_epochs < 1 or self.iterations < 0:
            raise ValueError("epoch/iteration counts out of range")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def with_overrides(self, **kw) -> "ExperimentSpec":
        return replace(self, **kw)


@dataclass
class MetricsRow:
    experiment: str
    phase: str
    eval_task: str
    iteration: int
    accuracy: float
    mean_loss: float
    wall_clock_s: float
    weight_delta_fro: float

    def formatted(self) -> tuple:
        return (self.experiment, self.phase, self.eval_task,
                str(self.iteration), f"{self.accuracy:.6f}",
                f"{self.mean_loss:.6f}", f"{self.wall_clock_s:.3f}",
                f"{self.weight_delta_fro:.6e}")


def _build_trainer(spec: ExperimentSpec):
    vocab = spec.tasks[0].vocab
    for t in spec.tasks:
        if t.vocab is not vocab:
            raise ValueError("all tasks of one experiment must share a vocabulary")
    params = LstmParams(len(vocab), spec.input_dim, spec.hidden)
    params.init(Rng(spec.seed).child("init"), scheme=spec.init,
                forget_bias=spec.forget_bias)
    penalty = None
    if spec.method == "ewc":
        penalty = EwcPenalty(params.n_params, lam=spec.lam,
                             fisher_samples=spec.fisher_samples,
                             window=spec.window)
    trainer = Trainer(params, make_policy(spec.policy), window=spec.window,
                      lr=spec.lr, penalty=penalty)
    return trainer, penalty


def _maybe_checkpoint(spec: ExperimentSpec, trainer: Trainer, penalty) -> None:
    if spec.checkpoint:
        from .checkpoint import save_checkpoint
        save_checkpoint(spec.checkpoint, trainer.params,
                        vocab=spec.tasks[0].vocab, store=trainer.store,
                        penalty=penalty)


class _Clock:
    """Process-CPU stopwatch that reads 0.0 when timing is disabled."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.total = 0.0

    def lap(self):
        self._t0 = time.process_time()

    def stop(self) -> float:
        if not self.enabled:
            return 0.0
        dt = time.process_time() - self._t0
        self.total += dt
        return dt


def _wh_delta(trainer: Trainer, prev: np.ndarray):
    """Frobenius norm of the recurrent-weight change since ``prev``,
    plus a fresh copy for the next call."""
    cur = trainer.params.Wh
    return float(np.linalg.norm(cur - prev)), cur.copy()


def run_pair(spec: ExperimentSpec) -> list[MetricsRow]:
    """Pretrain on tasks[0], then expose tasks[1] pass by pass, evaluating
    retention of both tasks with frozen weights after every pass."""
    if len(spec.tasks) != 2:
        raise ValueError("run_pair needs exactly 2 tasks")
    t1, t2 = spec.tasks
    trainer, _ = _build_trainer(spec)
    clock = _Clock(spec.timing)
    rows: list[MetricsRow] = []
    wh_prev = trainer.params.Wh.copy()

    for epoch in range(spec.pretrain_epochs):
        clock.lap()
        loss, acc = trainer.train_pass(t1)
        dt = clock.stop()
        wd, wh_prev = _wh_delta(trainer, wh_prev)
        rows.append(MetricsRow(spec.name, "pretrain", t1.task_id, epoch,
                               acc, loss, dt, wd))

    def eval_both(iteration: int, dt: float, wd: float):
        for task in (t1, t2):
            loss, acc = trainer.evaluate(task)
            rows.append(MetricsRow(spec.name, "continual", task.task_id,
                                   iteration, acc, loss, dt, wd))

    eval_both(0, 0.0, 0.0)
    for it in range(1, spec.iterations + 1):
        clock.lap()
        trainer.train_pass(t2)
        dt = clock.stop()
        wd, wh_prev = _wh_delta(trainer, wh_prev)
        if it % spec.eval_every == 0 or it == spec.iterations:
            eval_both(it, dt, wd)
    _maybe_checkpoint(spec, trainer, None)
    return rows


def run_sequence(spec: ExperimentSpec):
    """Train every task in order, then evaluate all of them.

    With method ewc, the Fisher of each finished task is folded into the
    quadratic penalty before the next task starts; consolidation time
    counts as training time. Returns (rows, summary dict).
    """
    if len(spec.tasks) < 2:
        raise ValueError("run_sequence needs at least 2 tasks")
    trainer, penalty = _build_trainer(spec)
    clock = _Clock(spec.timing)
    rows: list[MetricsRow] = []
    epochs = spec.epochs_per_task or spec.pretrain_epochs
    wh_prev = trainer.params.Wh.copy()

    for task in spec.tasks:
        for epoch in range(epochs):
            clock.lap()
            loss, acc = trainer.train_pass(task)
            dt = clock.stop()
            wd, wh_prev = _wh_delta(trainer, wh_prev)
            rows.append(MetricsRow(spec.name, "pretrain", task.task_id,
                                   epoch, acc, loss, dt, wd))
        if penalty is not None:
            clock.lap()
            penalty.consolidate(trainer.params, task)
            clock.stop()

    accs = []
    for task in spec.tasks:
        loss, acc = trainer.evaluate(task)
        accs.append(acc)
        rows.append(MetricsRow(spec.name, "continual", task.task_id,
                               len(spec.tasks), acc, loss, 0.0, 0.0))
    summary = {
        "experiment": spec.name,
        "n_tasks": len(spec.tasks),
        "method": spec.method,
        "policy": spec.policy,
        "mean_final_accuracy": float(np.mean(accs)),
        "total_train_s": clock.total if spec.timing else 0.0,
    }
    _maybe_checkpoint(spec, trainer, penalty)
    return rows, summary


def run_single(spec: ExperimentSpec) -> list[MetricsRow]:
    """Train tasks[0] alone and evaluate it with frozen weights."""
    task = spec.tasks[0]
    trainer, _ = _build_trainer(spec)
    clock = _Clock(spec.timing)
    rows: list[MetricsRow] = []
    wh_prev = trainer.params.Wh.copy()
    for epoch in range(spec.pretrain_epochs):
        clock.lap()
        loss, acc = trainer.train_pass(task)
        dt = clock.stop()
        wd, wh_prev = _wh_delta(trainer, wh_prev)
        rows.append(MetricsRow(spec.name, "pretrain", task.task_id, epoch,
                               acc, loss, dt, wd))
    loss, acc = trainer.evaluate(task)
    rows.append(MetricsRow(spec.name, "continual", task.task_id, 0,
                           acc, loss, 0.0, 0.0))
    _maybe_checkpoint(spec, trainer, None)
    return rows


def accuracy_series(rows, task_id: str, phase: str = "continual"):
    """(iteration, accuracy) pairs of one task's evaluation series."""
    out = [(r.iteration, r.accuracy) for r in rows
           if r.phase == phase and r.eval_task == task_id]
    if not out:
        raise KeyError(f"no {phase} rows for task {task_id!r}")
    return out


def forgetting_delta(rows, task_id: str) -> float:
    """Retention summary: accuracy right after pretraining minus accuracy
    after the last exposure pass."""
    series = accuracy_series(rows, task_id)
    return series[0][1] - series[-1][1]


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.formatted())


def write_summary_csv(path, summaries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow((s["experiment"], str(s["n_tasks"]), s["method"],
                        s["policy"], f"{s['mean_final_accuracy']:.6f}",
                        f"{s['total_train_s']:.3f}"))
