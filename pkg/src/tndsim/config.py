"""Line-oriented ``key = value`` scenario files.

Example::

    # first worked example: 10% vs 1% prevalence, perfect test
    schema = 1
    n_vax = 10000
    n_unvax = 10000
    p_vax = 0.01
    p_unvax = 0.10
    sensitivity = 1.0
    specificity = 1.0

A sweep adds ``kind = sweep`` and numbered axes.  Parameters listed on the
same axis vary together; separate axes form a Cartesian grid::

    kind = sweep
    axis.1 = sensitivity, specificity
    axis.1.values = 1.0 1.0; 0.70 0.95; 0.95 0.70
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Optional

from .diagnostic import DiagnosticTest
from .errors import ConfigError, TNDError
from .estimators import COMBINED, CONTROL_POLICIES, METHODS, RISK_RATIO
from .population import ARMS, CATEGORIES
from .simulate import (
    CARE_PATHS,
    DETERMINISTIC,
    MODES,
    NUMERIC_PATHS,
    STOCHASTIC,
    Axis,
    Scenario,
    SweepSpec,
)

SCHEMA_VERSION = "1"

REQUIRED = ("schema", "n_vax", "n_unvax", "p_vax", "p_unvax", "sensitivity", "specificity")
OPTIONAL = ("kind", "other_vax", "other_unvax", "method", "control", "correct",
            "mode", "seed", "replications") + CARE_PATHS
_AXIS_KEY = re.compile(r"^axis\.([1-9][0-9]*)(\.values)?$")
_SIZE_KEYS = ("n_vax", "n_unvax")


class Violation(NamedTuple):
    line: Optional[int]
    key: str
    kind: str
    message: str

    def __str__(self):
        where = f"line {self.line}" if self.line is not None else "document"
        return f"{where}: {self.key}: {self.kind}: {self.message}"


def _number(text):
    return float(text)


def _check_value(path, x):
    """Range problem for a numeric parameter, or None."""
    if path in _SIZE_KEYS:
        if not x > 0 or x != x or x == float("inf"):
            return "must be a positive finite count"
    elif not 0.0 <= x <= 1.0:
        return "must be a probability in [0, 1]"
    return None


def parse_config(text):
    """Parse a scenario or sweep file into a ``Scenario`` or ``SweepSpec``.

    Raises :class:`ConfigError` listing every problem found.
    """
    problems = []
    entries = {}  # key -> (line, raw value)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(Violation(lineno, key or raw.strip(), "syntax", "expected 'key = value'"))
            continue
        if key in entries:
            problems.append(Violation(lineno, key, "duplicate",
                                      f"already set on line {entries[key][0]}"))
            continue
        if key not in REQUIRED and key not in OPTIONAL and not _AXIS_KEY.match(key):
            problems.append(Violation(lineno, key, "unknown-key", "not part of schema 1"))
            continue
        entries[key] = (lineno, value)

    for key in REQUIRED:
        if key not in entries:
            problems.append(Violation(None, key, "missing-key", "required"))

    if "schema" in entries and entries["schema"][1] != SCHEMA_VERSION:
        line, value = entries["schema"]
        problems.append(Violation(line, "schema", "version-mismatch",
                                  f"got {value!r}, this reader understands {SCHEMA_VERSION!r}"))

    values = {}

    def num(key, default=None):
        if key not in entries:
            return default
        line, raw = entries[key]
        try:
            x = _number(raw)
        except ValueError:
            problems.append(Violation(line, key, "type", f"{raw!r} is not a number"))
            return None
        msg = _check_value(key, x)
        if msg:
            problems.append(Violation(line, key, "range", f"{raw} {msg}"))
            return None
        return x

    def choice(key, options, default):
        if key not in entries:
            return default
        line, raw = entries[key]
        if raw not in options:
            problems.append(Violation(line, key, "type", f"{raw!r} not one of {', '.join(options)}"))
            return None
        return raw

    def integer(key, lo, hi):
        if key not in entries:
            return None
        line, raw = entries[key]
        try:
            x = int(raw)
        except ValueError:
            problems.append(Violation(line, key, "type", f"{raw!r} is not an integer"))
            return None
        if not lo <= x <= hi:
            problems.append(Violation(line, key, "range", f"{x} outside [{lo}, {hi}]"))
            return None
        return x

    for key in ("n_vax", "n_unvax", "p_vax", "p_unvax", "sensitivity", "specificity"):
        values[key] = num(key)
    values["other_vax"] = num("other_vax", 0.0)
    values["other_unvax"] = num("other_unvax", 0.0)
    care = {}
    for path in CARE_PATHS:
        _, arm, cat = path.split(".")
        care[arm, cat] = num(path, 1.0)
    kind = choice("kind", ("scenario", "sweep"), "scenario")
    method = choice("method", METHODS, RISK_RATIO)
    control = choice("control", CONTROL_POLICIES, COMBINED)
    mode = choice("mode", MODES, DETERMINISTIC)
    correct = choice("correct", ("true", "false"), "false")
    seed = integer("seed", 0, 2**64 - 1)
    replications = integer("replications", 1, 10**9)

    if mode == STOCHASTIC and "seed" not in entries:
        problems.append(Violation(entries["mode"][0], "seed", "missing-key",
                                  "stochastic mode needs a seed"))
    if correct == "true" and method not in (None, RISK_RATIO):
        problems.append(Violation(entries["correct"][0], "correct", "schema",
                                  "rate correction only applies to method = risk-ratio"))
    for arm, p, o in (("vax", "p_vax", "other_vax"), ("unvax", "p_unvax", "other_unvax")):
        if values[p] is not None and values[o] is not None and values[p] + values[o] > 1.0:
            problems.append(Violation(entries[o][0] if o in entries else entries[p][0], o, "range",
                                      f"{p} + {o} exceeds 1"))

    axes = _parse_axes(entries, problems)
    if kind == "sweep" and not axes and not any(v.key.startswith("axis.") for v in problems):
        problems.append(Violation(entries["kind"][0], "kind", "schema",
                                  "a sweep needs at least one axis.N / axis.N.values pair"))
    if kind != "sweep":
        for key in entries:
            if key.startswith("axis.") or key == "replications":
                problems.append(Violation(entries[key][0], key, "schema",
                                          "only allowed with kind = sweep"))

    if problems:
        raise ConfigError(sorted(problems, key=lambda v: (v.line is None, v.line or 0, v.key)))

    try:
        scenario = Scenario(
            n_vax=values["n_vax"], n_unvax=values["n_unvax"],
            p_vax=values["p_vax"], p_unvax=values["p_unvax"],
            test=DiagnosticTest(values["sensitivity"], values["specificity"]),
            other_vax=values["other_vax"], other_unvax=values["other_unvax"],
            care=care, method=method, control=control, correct=correct == "true",
            mode=mode, seed=seed,
        )
        if kind == "scenario":
            return scenario
        return SweepSpec(scenario, tuple(axes), replications or 1)
    except TNDError as exc:
        raise ConfigError([Violation(None, "-", "schema", str(exc))]) from exc


def _parse_axes(entries, problems):
    numbered = {}
    for key, (line, raw) in entries.items():
        m = _AXIS_KEY.match(key)
        if m:
            numbered.setdefault(int(m.group(1)), {})["values" if m.group(2) else "paths"] = (line, raw, key)
    axes = []
    for k in sorted(numbered):
        parts = numbered[k]
        if "paths" not in parts or "values" not in parts:
            have = parts.get("paths") or parts.get("values")
            missing = f"axis.{k}" if "paths" not in parts else f"axis.{k}.values"
            problems.append(Violation(have[0], missing, "missing-key", f"{have[2]} given without it"))
            continue
        pline, praw, pkey = parts["paths"]
        vline, vraw, vkey = parts["values"]
        paths = tuple(p.strip() for p in praw.split(","))
        ok = True
        for p in paths:
            if p not in NUMERIC_PATHS:
                problems.append(Violation(pline, pkey, "schema", f"{p!r} is not a numeric scenario field"))
                ok = False
        steps = []
        for chunk in vraw.split(";"):
            fields = chunk.split()
            if len(fields) != len(paths):
                problems.append(Violation(vline, vkey, "schema",
                                          f"step {chunk.strip()!r} needs {len(paths)} value(s)"))
                ok = False
                continue
            try:
                step = tuple(_number(f) for f in fields)
            except ValueError:
                problems.append(Violation(vline, vkey, "type", f"non-numeric step {chunk.strip()!r}"))
                ok = False
                continue
            for p, x in zip(paths, step):
                msg = _check_value(p, x) if p in NUMERIC_PATHS else None
                if msg:
                    problems.append(Violation(vline, vkey, "range", f"{p} = {x!r} {msg}"))
                    ok = False
            steps.append(step)
        if ok:
            axes.append(Axis(paths, tuple(steps)))
    seen = {}
    for axis in axes:
        for p in axis.paths:
            if p in seen:
                problems.append(Violation(None, p, "schema", "parameter appears on two axes"))
            seen[p] = True
    return axes


def _fmt(x):
    return repr(float(x))


def format_config(obj):
    """Serialise a ``Scenario`` or ``SweepSpec``; ``parse_config`` inverts it."""
    spec = obj if isinstance(obj, SweepSpec) else None
    s = spec.base if spec else obj
    lines = [f"schema = {SCHEMA_VERSION}", f"kind = {'sweep' if spec else 'scenario'}"]
    for key in ("n_vax", "n_unvax", "p_vax", "p_unvax", "sensitivity", "specificity",
                "other_vax", "other_unvax"):
        lines.append(f"{key} = {_fmt(s.get(key))}")
    for arm in ARMS:
        for cat in CATEGORIES:
            lines.append(f"care.{arm}.{cat} = {_fmt(s.care[arm, cat])}")
    lines += [f"method = {s.method}", f"control = {s.control}",
              f"correct = {'true' if s.correct else 'false'}", f"mode = {s.mode}"]
    if s.seed is not None:
        lines.append(f"seed = {s.seed}")
    if spec:
        lines.append(f"replications = {spec.replications}")
        for k, axis in enumerate(spec.axes, start=1):
            lines.append(f"axis.{k} = {', '.join(axis.paths)}")
            steps = "; ".join(" ".join(_fmt(x) for x in step) for step in axis.values)
            lines.append(f"axis.{k}.values = {steps}")
    return "\n".join(lines) + "\n"


def shipped_configs():
    root = resources.files("tndsim") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def read_config_text(name_or_path):
    """Text of a config file, or of a shipped example such as ``paper_baseline``."""
    path = Path(name_or_path)
    if path.exists():
        return path.read_text(encoding="utf-8")
    shipped = resources.files("tndsim") / "configs" / f"{name_or_path}.cfg"
    if shipped.is_file():
        return shipped.read_text(encoding="utf-8")
    raise FileNotFoundError(
        f"no config file {name_or_path!r} (shipped examples: {', '.join(shipped_configs())})")


def load_config(name_or_path):
    return parse_config(read_config_text(name_or_path))
