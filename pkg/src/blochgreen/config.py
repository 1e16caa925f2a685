"""Experiment configuration: a key = value file with sections.

Example::

    [experiment]
    fixture = advection-diffusion
    tasks = evans, resolvent, green
    seed = 0

    [numerics]
    K = 16
    n_xi = 128

Every value is range-checked when the file is parsed; a violation raises
:class:`ConfigError` naming the offending ``section.key``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

FIXTURES = ("heat", "advection-diffusion", "manufactured")
TASKS = ("evans", "resolvent", "spectrum", "green", "heat", "inequalities", "modulation")


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError("must be an integer")
    return int(f)


def _tasks(v):
    out = tuple(t.strip() for t in v.split(",") if t.strip())
    bad = [t for t in out if t not in TASKS]
    if bad:
        raise ValueError(f"unknown task(s) {bad}; choose from {list(TASKS)}")
    if not out:
        raise ValueError("at least one task is required")
    return out


def _fixture(v):
    v = v.strip()
    if v in FIXTURES or v.startswith("file:"):
        return v
    raise ValueError(f"unknown fixture {v!r}; use one of {list(FIXTURES)} or file:<path>")


# (section, key) -> (parser, check, description of the valid range, default)
SCHEMA = {
    ("experiment", "fixture"): (_fixture, None, "fixture name or file:<path>", "advection-diffusion"),
    ("experiment", "tasks"): (_tasks, None, "comma-separated tasks", "evans, resolvent, green"),
    ("experiment", "seed"): (_int, lambda v: v >= 0, "seed >= 0", 0),
    ("experiment", "drift"): (float, None, "real", 1.0),
    ("numerics", "K"): (_int, lambda v: v >= 8, "K ≥ 8", 16),
    ("numerics", "n_xi"): (_int, lambda v: v >= 16 and v % 2 == 0, "even n_xi >= 16", 128),
    ("numerics", "tol"): (float, lambda v: 1e-13 <= v <= 1e-4, "1e-13 <= tol <= 1e-4", 1e-10),
    ("numerics", "grid"): (_int, lambda v: v >= 16 and v % 2 == 0, "even grid >= 16", 64),
    ("numerics", "dt"): (float, lambda v: 0 < v <= 0.1, "0 < dt <= 0.1", 0.005),
    ("green", "times"): (lambda v: tuple(float(t) for t in v.split(",")),
                         lambda v: all(t >= 0.05 for t in v), "times >= 0.05", (0.5, 1.0)),
    ("green", "cells"): (_int, lambda v: v >= 8, "cells >= 8", 64),
    ("heat", "q"): (_int, lambda v: v >= 4, "integer q >= 4", 4),
    ("heat", "class"): (_int, lambda v: v in (1, 2, 3), "class in {1, 2, 3}", 1),
    ("heat", "E0"): (float, lambda v: 0 < v <= 0.05, "0 < E0 <= 0.05", 0.01),
    ("heat", "T"): (float, lambda v: 10 < v <= 1e4, "10 < T <= 1e4", 500.0),
    ("heat", "r"): (float, lambda v: v > 2, "r > 2", 3.0),
    ("heat", "M"): (float, lambda v: v > 0, "M > 0", 2.0),
    ("inequalities", "samples"): (_int, lambda v: v >= 10, "samples >= 10", 200),
    ("modulation", "E0"): (float, lambda v: 0 <= v <= 0.01, "0 <= E0 <= 0.01", 0.005),
    ("modulation", "T"): (float, lambda v: 2 < v <= 200, "2 < T <= 200", 50.0),
    ("modulation", "cells"): (_int, lambda v: v >= 32, "cells >= 32", 256),
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict
    output: Path
    source: str = ""
    extras: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, section, key):
        return self.values[(section, key)]

    @property
    def seed(self):
        return self.values[("experiment", "seed")]

    @property
    def tasks(self):
        return self.values[("experiment", "tasks")]

    def as_dict(self):
        """Validated values by section (the output directory is left out so
        that reruns elsewhere serialize identically)."""
        out = {}
        for (sec, key), v in sorted(self.values.items()):
            out.setdefault(sec, {})[key] = list(v) if isinstance(v, tuple) else v
        return out


def parse_config(text, output=None, base_dir=None):
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    values = {k: spec[3] for k, spec in SCHEMA.items()}
    out = output
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            name = f"{sec}.{key}"
            if (sec, key) == ("experiment", "output"):
                if out is None:
                    out = raw.strip()
                continue
            if (sec, key) not in SCHEMA:
                raise ConfigError(name, "unknown key")
            parse, check, desc, _ = SCHEMA[(sec, key)]
            try:
                val = parse(raw)
            except ValueError as exc:
                raise ConfigError(name, f"invalid value {raw!r} ({exc})") from None
            if check is not None and not check(val):
                raise ConfigError(name, f"{raw.strip()} out of range (need {desc})")
            values[(sec, key)] = val
    if out is None:
        raise ConfigError("experiment.output", "no output directory given")
    out = Path(out)
    # a path from the file is relative to the file; an override to the caller
    if output is None and base_dir is not None and not out.is_absolute():
        out = Path(base_dir) / out
    return ExperimentConfig(values, out, text)


def load_config(path, output=None):
    path = Path(path)
    return parse_config(path.read_text(), output=output, base_dir=path.parent)
