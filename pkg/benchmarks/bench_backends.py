"""Compare the compiled kernel against the numpy reference.

Runs the same training and evaluation workload through both backends and
prints per-step times plus the speedup. Also cross-checks that the two
backends produce identical losses, since a fast kernel that drifts from
the reference is worse than no kernel.

Usage: python benchmarks/bench_backends.py [--steps N] [--hidden H]
"""
import argparse
import time

import numpy as np

from statesep.backend import get_backend
from statesep.lstm import LstmParams
from statesep.numerics import Rng
from statesep.states import StateStore, make_policy
from statesep.tasks import make_pattern_task, PatternSpec, Vocabulary
from statesep.training import Trainer


def timed_pass(kernel, params, task, train: bool):
    trainer = Trainer(params.copy(), make_policy("shared"), kernel=kernel)
    trainer.train_pass(task) if train else trainer.evaluate(task)  # warm cache
    t0 = time.process_time()
    if train:
        loss, _ = trainer.train_pass(task)
    else:
        loss, _ = trainer.evaluate(task)
    dt = time.process_time() - t0
    return loss, dt / len(task)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--hidden", type=int, default=64)
    args = ap.parse_args()

    spec = PatternSpec((2, 2, -3, -3, -3, 7, 7, 7, 7),
                       total_length=args.steps)
    task = make_pattern_task(spec, Vocabulary(), task_id="bench")
    params = LstmParams(len(task.vocab), args.hidden, args.hidden)
    params.init(Rng(0).child("init"), forget_bias=4.0)

    backends = {}
    for name in ("python", "compiled"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"{name:>9}: not available")
    results = {}
    for name, kernel in backends.items():
        tr_loss, tr_step = timed_pass(kernel, params, task, train=True)
        ev_loss, ev_step = timed_pass(kernel, params, task, train=False)
        results[name] = (tr_loss, ev_loss)
        print(f"{name:>9}: train {tr_step * 1e6:8.1f} us/step   "
              f"eval {ev_step * 1e6:8.1f} us/step   "
              f"(loss {tr_loss:.6f} / {ev_loss:.6f})")
        if name == "python":
            py_tr, py_ev = tr_step, ev_step
        else:
            print(f"{'speedup':>9}: train x{py_tr / tr_step:.1f}   "
                  f"eval x{py_ev / ev_step:.1f}")

    if len(results) == 2:
        a, b = results["python"], results["compiled"]
        if abs(a[0] - b[0]) > 1e-9 or abs(a[1] - b[1]) > 1e-9:
            print(f"MISMATCH: python {a} vs compiled {b}")
            return 1
        print("backends agree on losses")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
