"""Named experiment recipes: resolved config in, CSV files out.

A recipe expands into a deterministic list of runs (one CSV each), executes
them serially or across ``jobs`` worker processes, and writes ``summary.csv``
plus an ``effective-config.txt`` snapshot next to the metrics. Timing mode
forces serial execution so CPU-time columns mean something.
"""
from __future__ import annotations

from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .config import render_config, resolve
from .harness import (ExperimentSpec, run_pair, run_sequence, run_single,
                      write_metrics_csv, write_summary_csv)
from .numerics import Rng
from .states import POLICY_NAMES
from .tasks import (PAIR_NAMES, Vocabulary, named_pair, pseudorandom_pair,
                    scalability_suite, tokens_from_text)

__all__ = ["build_runs", "run_recipe", "RunPlan"]


@dataclass
class RunPlan:
    """One experiment: which harness runner to call on which spec."""

    runner: str                # pair | sequence | single
    spec: ExperimentSpec


def _spec(values, name, tasks, **kw) -> ExperimentSpec:
    base = dict(
        name=name, tasks=tasks,
        hidden=values["hidden"], input_dim=values["hidden"],
        pretrain_epochs=values["epochs"], iterations=values["iterations"],
        lam=values["lambda"], timing=values["timing"],
    )
    if values["checkpoint"]:
        base["checkpoint"] = str(Path(values["out"]) / f"{name}.ckpt.npz")
    base.update(kw)
    return ExperimentSpec(**base)


def _policies(values, default):
    return (values["policy"],) if values["policy"] else default


def _pair_runs(values, pair_name, seed, init=None, tag=None):
    t1, t2 = named_pair(pair_name, total_length=values["task_len"],
                        n_extra=values["n_extra"])
    init = init or values["init"]
    method = values["method"] or "plain"
    tag = tag or f"pair_{pair_name}"
    plans = []
    for policy in _policies(values, ("shared", "task")):
        name = f"{tag}_{policy}_{method}_{init}_s{seed}"
        plans.append(RunPlan("pair", _spec(
            values, name, [t1, t2], policy=policy, method=method,
            init=init, seed=seed)))
    return plans


def _scalability_runs(values, seed):
    # Each arm runs at its own operating point. Keyed-state retention
    # relies on slowly drifting, well-spread steady states (wide uniform
    # init, neutral forget bias); the weight-penalty baseline runs on the
    # conventional network (xavier, long-memory forget bias), where its
    # accuracy-vs-task-count decline is expressed.
    combos = [("plain", "task", {"init": "uniform", "forget_bias": 0.0}),
              ("ewc", "shared", {"init": "xavier"})]
    if values["method"]:
        combos = [c for c in combos if c[0] == values["method"]]
    if values["policy"]:
        combos = [(m, values["policy"], kw) for m, _, kw in combos]
    plans = []
    for n in range(2, values["max_tasks"] + 1):
        tasks = scalability_suite(n, Rng(seed).child("suite"),
                                  total_length=values["task_len"])
        for method, policy, kw in combos:
            name = f"scal_n{n:02d}_{method}_{policy}_s{seed}"
            plans.append(RunPlan("sequence", _spec(
                values, name, tasks, policy=policy, method=method,
                seed=seed, epochs_per_task=values["epochs_per_task"], **kw)))
    return plans


def _init_study_runs(values, seed):
    plans = []
    for init in ("xavier", "uniform"):
        plans += _pair_runs(values, "diff_delta_diff_freq", seed, init=init,
                            tag="init_diff_delta_diff_freq")
    return plans


def _pseudorandom_runs(values, seed):
    t1, t2 = pseudorandom_pair(task_len=values["task_len"],
                               rng=Rng(seed).child("pseudo"))
    method = values["method"] or "plain"
    plans = []
    for policy in _policies(values, POLICY_NAMES):
        name = f"pseudo_{policy}_{method}_{values['init']}_s{seed}"
        plans.append(RunPlan("pair", _spec(
            values, name, [t1, t2], policy=policy, method=method,
            init=values["init"], seed=seed)))
    return plans


def _textfile_runs(values, seed):
    if not values.get("text"):
        raise ValueError("textfile recipe needs text=<path>")
    task = tokens_from_text(Path(values["text"]).read_text(encoding="utf-8"),
                            Vocabulary())
    method = values["method"] or "plain"
    plans = []
    for policy in _policies(values, ("shared", "label")):
        name = f"text_{policy}_{method}_{values['init']}_s{seed}"
        plans.append(RunPlan("single", _spec(
            values, name, [task], policy=policy, method=method,
            init=values["init"], seed=seed)))
    return plans


def build_runs(values: dict) -> list[RunPlan]:
    """Expand a resolved config into the full deterministic run list."""
    values = resolve(values)
    recipe = values["recipe"]
    if recipe is None:
        raise ValueError("no recipe specified")
    plans = []
    for k in range(values["seeds"]):
        seed = values["seed"] + k
        if recipe.startswith("pair:"):
            pair_name = recipe.split(":", 1)[1]
            if pair_name not in PAIR_NAMES:
                raise ValueError(f"unknown pair {pair_name!r}")
            plans += _pair_runs(values, pair_name, seed)
        elif recipe == "scalability":
            plans += _scalability_runs(values, seed)
        elif recipe == "init-study":
            plans += _init_study_runs(values, seed)
        elif recipe == "pseudorandom":
            plans += _pseudorandom_runs(values, seed)
        elif recipe == "textfile":
            plans += _textfile_runs(values, seed)
        else:
            raise ValueError(f"unknown recipe {recipe!r}")
    return plans


def _final_accuracies(rows):
    last = {}
    for r in rows:
        if r.phase == "continual":
            last[r.eval_task] = r.accuracy
    return list(last.values())


def _execute_plan(plan: RunPlan):
    """Run one plan; returns (name, rows, summary)."""
    spec = plan.spec
    if plan.runner == "pair":
        rows = run_pair(spec)
        summary = None
    elif plan.runner == "sequence":
        rows, summary = run_sequence(spec)
    elif plan.runner == "single":
        rows = run_single(spec)
        summary = None
    else:
        raise ValueError(f"unknown runner {plan.runner!r}")
    if summary is None:
        train_s = sum(r.wall_clock_s for r in rows if r.phase == "pretrain")
        summary = {
            "experiment": spec.name,
            "n_tasks": len(spec.tasks),
            "method": spec.method,
            "policy": spec.policy,
            "mean_final_accuracy": float(np.mean(_final_accuracies(rows))),
            "total_train_s": train_s if spec.timing else 0.0,
        }
    return spec.name, rows, summary


def run_recipe(values: dict, out_dir=None):
    """Execute a resolved config end to end; returns name -> summary."""
    values = resolve(values)
    if values["timing"]:
        values["jobs"] = 1   # CPU-time columns require serial execution
    plans = build_runs(values)
    out = Path(out_dir if out_dir is not None else values["out"])
    out.mkdir(parents=True, exist_ok=True)

    if values["jobs"] > 1 and len(plans) > 1:
        with Pool(values["jobs"]) as pool:
            results = pool.map(_execute_plan, plans)
    else:
        results = [_execute_plan(p) for p in plans]

    summaries = []
    for name, rows, summary in results:
        write_metrics_csv(out / f"{name}.csv", rows)
        summaries.append(summary)
    write_summary_csv(out / "summary.csv", summaries)
    (out / "effective-config.txt").write_text(render_config(values),
                                              encoding="utf-8")
    return {s["experiment"]: s for s in summaries}
