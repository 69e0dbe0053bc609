"""Experiment protocol structure, determinism of emitted CSVs, retention
metrics and the checkpoint hook."""
import numpy as np
import pytest

from statesep.checkpoint import load_checkpoint
from statesep.harness import (ExperimentSpec, accuracy_series,
                              forgetting_delta, run_pair, run_sequence,
                              run_single, write_metrics_csv,
                              write_summary_csv, CSV_HEADER)
from statesep.numerics import Rng
from statesep.tasks import named_pair, scalability_suite


def tiny_pair_spec(**kw):
    t1, t2 = named_pair("same_delta_diff_freq", total_length=120)
    base = dict(name="tiny", tasks=[t1, t2], hidden=8, input_dim=8,
                pretrain_epochs=2, iterations=3, seed=0)
    base.update(kw)
    return ExperimentSpec(**base)


def test_run_pair_row_structure():
    spec = tiny_pair_spec()
    rows = run_pair(spec)
    pre = [r for r in rows if r.phase == "pretrain"]
    cont = [r for r in rows if r.phase == "continual"]
    assert len(pre) == spec.pretrain_epochs
    assert [r.iteration for r in pre] == [0, 1]
    assert all(r.eval_task == spec.tasks[0].task_id for r in pre)
    # one evaluation of each task before exposure and after every pass
    assert len(cont) == 2 * (spec.iterations + 1)
    assert [r.iteration for r in cont] == [0, 0, 1, 1, 2, 2, 3, 3]
    ids = {r.eval_task for r in cont}
    assert ids == {spec.tasks[0].task_id, spec.tasks[1].task_id}
    assert all(0.0 <= r.accuracy <= 1.0 for r in rows)
    assert all(np.isfinite(r.mean_loss) for r in rows)


def test_run_pair_eval_every():
    rows = run_pair(tiny_pair_spec(iterations=5, eval_every=2))
    cont = [r.iteration for r in rows if r.phase == "continual"]
    # 0 up front, multiples of 2, and always the last pass
    assert cont == [0, 0, 2, 2, 4, 4, 5, 5]


def test_run_pair_needs_two_tasks():
    t1, _ = named_pair("one_extra_delta", total_length=60)
    spec = ExperimentSpec(name="x", tasks=[t1], hidden=8, input_dim=8,
                          pretrain_epochs=1, iterations=1)
    with pytest.raises(ValueError):
        run_pair(spec)


def test_spec_validation():
    t1, t2 = named_pair("one_extra_delta", total_length=60)
    with pytest.raises(ValueError):
        ExperimentSpec(name="x", tasks=[])
    with pytest.raises(ValueError):
        ExperimentSpec(name="x", tasks=[t1, t2], method="sgd")
    with pytest.raises(ValueError):
        ExperimentSpec(name="x", tasks=[t1, t2], init="zeros")
    with pytest.raises(ValueError):
        ExperimentSpec(name="x", tasks=[t1, t2], eval_every=0)


def test_rows_deterministic_and_csv_byte_identical(tmp_path):
    spec = tiny_pair_spec()
    rows_a = run_pair(spec)
    rows_b = run_pair(tiny_pair_spec())
    assert [r.formatted() for r in rows_a] == [r.formatted() for r in rows_b]
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_metrics_csv(pa, rows_a)
    write_metrics_csv(pb, rows_b)
    assert pa.read_bytes() == pb.read_bytes()
    head = pa.read_text().splitlines()[0]
    assert head == ",".join(CSV_HEADER)


def test_seed_changes_rows():
    rows_a = run_pair(tiny_pair_spec())
    rows_b = run_pair(tiny_pair_spec(seed=1))
    a = [r.accuracy for r in rows_a]
    b = [r.accuracy for r in rows_b]
    assert a != b


def test_time_columns_zero_without_timing():
    rows = run_pair(tiny_pair_spec())
    assert all(r.wall_clock_s == 0.0 for r in rows)
    rows = run_pair(tiny_pair_spec(timing=True))
    assert any(r.wall_clock_s > 0.0 for r in rows if r.phase == "pretrain")


def test_accuracy_series_and_forgetting_delta():
    spec = tiny_pair_spec()
    rows = run_pair(spec)
    t1 = spec.tasks[0].task_id
    ser = accuracy_series(rows, t1)
    assert [it for it, _ in ser] == [0, 1, 2, 3]
    assert forgetting_delta(rows, t1) == ser[0][1] - ser[-1][1]
    with pytest.raises(KeyError):
        accuracy_series(rows, "nope")


def test_run_sequence_summary():
    tasks = scalability_suite(3, Rng(0), total_length=90)
    spec = ExperimentSpec(name="seq", tasks=tasks, policy="task",
                          hidden=8, input_dim=8, pretrain_epochs=1,
                          epochs_per_task=2, iterations=0, seed=0)
    rows, summary = run_sequence(spec)
    pre = [r for r in rows if r.phase == "pretrain"]
    fin = [r for r in rows if r.phase == "continual"]
    assert len(pre) == 3 * 2 and len(fin) == 3
    assert all(r.iteration == 3 for r in fin)
    assert summary["n_tasks"] == 3 and summary["policy"] == "task"
    assert summary["mean_final_accuracy"] == pytest.approx(
        np.mean([r.accuracy for r in fin]))
    assert summary["total_train_s"] == 0.0


def test_run_sequence_ewc_differs_from_plain():
    tasks = scalability_suite(3, Rng(0), total_length=90)
    base = dict(name="seq", tasks=tasks, policy="shared", hidden=8,
                input_dim=8, pretrain_epochs=1, epochs_per_task=2,
                iterations=0, seed=0)
    rows_p, plain = run_sequence(ExperimentSpec(method="plain", **base))
    rows_e, ewc = run_sequence(ExperimentSpec(method="ewc", lam=1e4, **base))
    assert plain["method"] == "plain" and ewc["method"] == "ewc"
    # the anchor penalty steers training from the second task on
    lp = [r.mean_loss for r in rows_p if r.phase == "continual"]
    le = [r.mean_loss for r in rows_e if r.phase == "continual"]
    assert lp != le


def test_run_single_rows():
    t1, _ = named_pair("one_extra_delta", total_length=80)
    spec = ExperimentSpec(name="one", tasks=[t1], hidden=8, input_dim=8,
                          pretrain_epochs=3, iterations=0, seed=0)
    rows = run_single(spec)
    assert [r.phase for r in rows] == ["pretrain"] * 3 + ["continual"]
    assert rows[-1].eval_task == t1.task_id


def test_checkpoint_hook_writes_loadable_file(tmp_path):
    path = tmp_path / "run.ckpt.npz"
    spec = tiny_pair_spec(checkpoint=str(path))
    run_pair(spec)
    ck = load_checkpoint(path)
    assert ck.params.hidden == 8
    assert ck.store is not None and len(ck.store.snapshot()["index"]) >= 1
    assert ck.vocab is not None


def test_summary_csv_format(tmp_path):
    s = {"experiment": "e", "n_tasks": 2, "method": "plain",
         "policy": "task", "mean_final_accuracy": 0.5, "total_train_s": 0.0}
    p = tmp_path / "summary.csv"
    write_summary_csv(p, [s])
    lines = p.read_text().splitlines()
    assert lines[0].startswith("experiment,")
    assert lines[1] == "e,2,plain,task,0.500000,0.000"
