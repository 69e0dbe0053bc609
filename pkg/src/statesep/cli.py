"""Command-line entry point.

Two commands:

    statesep run <recipe> [flags]       execute a named recipe
    statesep validate <config-file>     check a config file, echo the
                                        resolved spec when it is clean

Value precedence for ``run``: explicit flags, then ``--config`` file
values, then built-in defaults. ``--paper-scale`` swaps the desk-scale
defaults (hidden 64, task length 2,000, 50 pretrain epochs) for the
full-scale ones (100 / 10,000 / 100) without overriding anything given
explicitly. Exit codes: 0 success, 1 runtime failure, 2 bad usage.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RECIPES, parse_config, render_config, resolve
from .recipes import run_recipe

__all__ = ["main", "build_parser"]

PAPER_SCALE = {"hidden": 100, "task_len": 10_000, "epochs": 100}


def _recipe_arg(text: str) -> str:
    if text not in RECIPES:
        raise argparse.ArgumentTypeError(
            f"unknown recipe {text!r} (choose from {', '.join(RECIPES)})")
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="statesep",
        description="Continual-learning LSTM experiments with keyed "
                    "cell-state separation.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a named recipe")
    run.add_argument("recipe", nargs="?", type=_recipe_arg,
                     help="one of: " + ", ".join(RECIPES))
    run.add_argument("--config", metavar="FILE",
                     help="key=value config file (flags still win)")
    run.add_argument("--seed", type=int)
    run.add_argument("--seeds", type=int, metavar="N",
                     help="repeat every run at seed..seed+N-1")
    run.add_argument("--hidden", type=int)
    run.add_argument("--task-len", dest="task_len", type=int)
    run.add_argument("--epochs", type=int,
                     help="pretraining passes over the first task")
    run.add_argument("--epochs-per-task", dest="epochs_per_task", type=int,
                     help="training passes per task in sequence recipes")
    run.add_argument("--iterations", type=int,
                     help="exposure passes over the second task")
    run.add_argument("--policy", choices=("shared", "task", "label"))
    run.add_argument("--method", choices=("plain", "ewc"))
    run.add_argument("--lambda", dest="lambda_", type=float,
                     help="EWC penalty strength")
    run.add_argument("--init", choices=("xavier", "uniform"))
    run.add_argument("--out", metavar="DIR")
    run.add_argument("--jobs", type=int, metavar="N",
                     help="max concurrent experiments")
    run.add_argument("--paper-scale", action="store_const", const=True,
                     dest="paper_scale")
    run.add_argument("--timing", action="store_const", const=True,
                     help="record CPU times (forces serial execution)")
    run.add_argument("--checkpoint", action="store_const", const=True,
                     help="save params/store checkpoints next to the CSVs")
    run.add_argument("--max-tasks", dest="max_tasks", type=int,
                     help="largest suite size for the scalability recipe")
    run.add_argument("--n-extra", dest="n_extra", type=int,
                     help="extra-delta run length for pair:one_extra_delta")
    run.add_argument("--text", metavar="FILE",
                     help="corpus file for the textfile recipe")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("path", metavar="FILE")
    return p


def _flag_values(args: argparse.Namespace) -> dict:
    keys = ("recipe", "seed", "seeds", "hidden", "task_len", "epochs",
            "epochs_per_task", "iterations", "policy", "method", "init",
            "out", "jobs", "paper_scale", "timing", "checkpoint",
            "max_tasks", "n_extra", "text")
    vals = {k: getattr(args, k) for k in keys}
    vals["lambda"] = args.lambda_
    return {k: v for k, v in vals.items() if v is not None}


def _cmd_run(args: argparse.Namespace) -> int:
    file_values = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            print(f"error: config file {path} not found", file=sys.stderr)
            return 2
        report = parse_config(path.read_text(encoding="utf-8"))
        if not report.ok:
            print(report.formatted(str(path)), file=sys.stderr)
            return 2
        file_values = report.values

    flags = _flag_values(args)
    values = resolve(file_values, flags)
    if values["recipe"] is None:
        print("error: no recipe specified (positional argument or "
              "recipe= in the config file)", file=sys.stderr)
        return 2
    if values["paper_scale"]:
        for key, val in PAPER_SCALE.items():
            if key not in file_values and key not in flags:
                values[key] = val

    try:
        summaries = run_recipe(values)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(values["out"])
    print(f"wrote {len(summaries)} experiment file(s) to {out}")
    for name, s in summaries.items():
        print(f"  {name}: mean_final_accuracy={s['mean_final_accuracy']:.3f}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"error: config file {path} not found", file=sys.stderr)
        return 2
    from .config import validate_config
    report = validate_config(path)
    if not report.ok:
        print(report.formatted(str(path)), file=sys.stderr)
        return 2
    print(render_config(report.values), end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
