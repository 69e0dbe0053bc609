"""Run configuration: flat key=value files, validation, precedence.

Config files are plain text: one ``key = value`` per line, ``#`` or ``;``
comments, optional ``[section]`` headers that group lines visually but do
not namespace keys (every key lives in one flat namespace). Precedence is
command-line flags over file values over built-in defaults.

``validate_config`` never partially executes anything: it parses the whole
file and reports every problem with its line number, or echoes the fully
resolved spec when the file is clean. The same renderer writes the
effective-config snapshot next to each run's CSVs, and that snapshot is
itself a valid config file.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .states import POLICY_NAMES
from .tasks import PAIR_NAMES

__all__ = ["DEFAULTS", "RECIPES", "parse_config", "validate_config",
           "resolve", "render_config", "ConfigReport"]

RECIPES = ("scalability", "init-study", "pseudorandom", "textfile") + tuple(
    f"pair:{name}" for name in PAIR_NAMES)

# One row per key: (converter, check, requirement shown in diagnostics).
_POS = ("must be >= 1", lambda v: v >= 1)
_NONNEG = ("must be >= 0", lambda v: v >= 0)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(text)


def _recipe(text: str) -> str:
    name = text.strip()
    if name not in RECIPES:
        raise ValueError(name)
    return name


def _choice(options):
    def conv(text: str) -> str:
        name = text.strip()
        if name not in options:
            raise ValueError(name)
        return name
    conv.options = options
    return conv


SCHEMA = {
    "recipe": (_recipe, None, "one of " + ", ".join(RECIPES)),
    "seed": (int, _NONNEG, "integer >= 0"),
    "hidden": (int, _POS, "integer >= 1"),
    "task_len": (int, ("must be >= 2", lambda v: v >= 2), "integer >= 2"),
    "epochs": (int, _POS, "integer >= 1"),
    "epochs_per_task": (int, _POS, "integer >= 1"),
    "iterations": (int, _POS, "integer >= 1"),
    "policy": (_choice(POLICY_NAMES), None, "one of " + ", ".join(POLICY_NAMES)),
    "method": (_choice(("plain", "ewc")), None, "one of plain, ewc"),
    "lambda": (float, _NONNEG, "real >= 0"),
    "init": (_choice(("xavier", "uniform")), None, "one of xavier, uniform"),
    "out": (str, None, "directory path"),
    "jobs": (int, _POS, "integer >= 1"),
    "paper_scale": (_bool, None, "boolean"),
    "seeds": (int, _POS, "integer >= 1"),
    "timing": (_bool, None, "boolean"),
    "max_tasks": (int, ("must be >= 2", lambda v: v >= 2), "integer >= 2"),
    "n_extra": (int, _POS, "integer >= 1"),
    "text": (str, None, "file path"),
    "checkpoint": (_bool, None, "boolean"),
}

DEFAULTS = {
    "recipe": None,
    "seed": 0,
    "hidden": 64,
    "task_len": 2_000,
    "epochs": 50,
    "epochs_per_task": 1,
    "iterations": 30,
    "policy": None,          # None = every policy the recipe compares
    "method": None,          # None = every method the recipe compares
    "lambda": 400.0,
    "init": "xavier",
    "out": "results",
    "jobs": 1,
    "paper_scale": False,
    "seeds": 1,
    "timing": False,
    "max_tasks": 20,
    "n_extra": 1,
    "text": None,
    "checkpoint": False,
}


@dataclass
class ConfigReport:
    """Outcome of parsing + validating one config file."""

    values: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)   # (line, message)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def formatted(self, path="config") -> str:
        return "\n".join(f"{path}:{line}: {msg}"
                         for line, msg in self.diagnostics)


def parse_config(text: str) -> ConfigReport:
    """Parse key=value lines, reporting every problem with its line."""
    report = ConfigReport()
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            continue   # grouping only
        if "=" not in line:
            report.diagnostics.append(
                (lineno, f"expected key = value, got {line!r}"))
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.split("#")[0].split(";")[0].strip()
        if key not in SCHEMA:
            report.diagnostics.append((lineno, f"unknown key {key!r}"))
            continue
        if key in seen:
            report.diagnostics.append(
                (lineno, f"duplicate key {key!r} (first set on line {seen[key]})"))
            continue
        seen[key] = lineno
        conv, check, requirement = SCHEMA[key]
        try:
            parsed = conv(value)
        except ValueError:
            report.diagnostics.append(
                (lineno, f"bad value {value!r} for {key!r}: expected {requirement}"))
            continue
        if check is not None and not check[1](parsed):
            report.diagnostics.append(
                (lineno, f"{key!r} out of range: {check[0]} (got {parsed})"))
            continue
        report.values[key] = parsed
    return report


def validate_config(path) -> ConfigReport:
    """Full-file validation; a clean report carries the resolved values."""
    with open(path, "r", encoding="utf-8") as fh:
        report = parse_config(fh.read())
    if "recipe" not in report.values and not any(
            "recipe" in msg for _, msg in report.diagnostics):
        report.diagnostics.append((0, "no recipe specified"))
    report.diagnostics.sort()
    if report.ok:
        report.values = resolve(report.values)
    return report


def resolve(file_values: dict, flag_values: dict | None = None) -> dict:
    """Effective config: defaults, overlaid by file, overlaid by flags."""
    out = dict(DEFAULTS)
    out.update(file_values)
    if flag_values:
        out.update({k: v for k, v in flag_values.items() if v is not None})
    return out


def render_config(values: dict, header: str = "run") -> str:
    """Render values as a config file (reparses to the same dict)."""
    lines = [f"[{header}]"]
    for key in SCHEMA:
        val = values.get(key, DEFAULTS.get(key))
        if val is None:
            continue
        if isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"
