"""Run configuration and self-describing CSV / JSON tables."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .errors import ConfigError

COMMANDS = ("density", "inverse-density", "kernel-p", "kernel-q", "joint2", "joint-xyvr", "simulate", "verify")
MODELS = ("example1", "example2", "pure-drift")
FORMATS = ("csv", "json")


@dataclass
class GridAxis:
    name: str
    min: float
    max: float
    points: int

    @classmethod
    def parse(cls, text: str) -> "GridAxis":
        """``name:min:max:points``"""
        parts = str(text).split(":")
        if len(parts) != 4:
            raise ConfigError(f"grid: expected name:min:max:points, got {text!r}")
        try:
            ax = cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as e:
            raise ConfigError(f"grid: cannot parse {text!r} ({e})") from None
        ax.validate()
        return ax

    def validate(self):
        if self.points < 2:
            raise ConfigError(f"grid: axis {self.name!r} needs at least 2 points")
        if not self.max > self.min:
            raise ConfigError(f"grid: axis {self.name!r} needs max > min")

    def values(self):
        import numpy as np
        return np.linspace(self.min, self.max, self.points)

    def __str__(self):
        return f"{self.name}:{self.min!r}:{self.max!r}:{self.points}"


@dataclass
class RunConfig:
    command: str
    model: str = "example1"
    beta: float = 0.5
    times: list = field(default_factory=lambda: [1.0])
    grid: list = field(default_factory=list)
    start: list = field(default_factory=lambda: [0.0, 0.0])
    tol_rel: float = 1e-5
    tol_abs: float = 0.0
    seed: int = 20261016
    paths: int = 10_000
    scale: float | None = None
    du: float = 2e-3
    output: str | None = None
    format: str = "csv"
    workers: int | None = None
    quick: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: must be one of {', '.join(COMMANDS)}")
        if self.model not in MODELS:
            raise ConfigError(f"model: must be one of {', '.join(MODELS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"format: must be one of {', '.join(FORMATS)}")
        self.times = [float(t) for t in _as_list(self.times)]
        if not self.times:
            raise ConfigError("times: at least one time is required")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("times must be strictly increasing")
        self.grid = [g if isinstance(g, GridAxis) else GridAxis.parse(g) for g in _as_list(self.grid)]
        names = [g.name for g in self.grid]
        if len(set(names)) != len(names):
            raise ConfigError("grid: repeated axis name")
        self.start = [float(s) for s in _as_list(self.start)]
        if len(self.start) != 2:
            raise ConfigError("start: expected two numbers (position, time coordinate)")
        if self.model != "pure-drift" and not 0 < float(self.beta) < 1:
            raise ConfigError("beta: must lie in (0, 1)")
        if not self.tol_rel > 0 or self.tol_abs < 0:
            raise ConfigError("tol_rel: must be positive and tol_abs non-negative")
        if int(self.paths) < 1:
            raise ConfigError("paths: must be at least 1")
        if self.scale is not None and not float(self.scale) > 0:
            raise ConfigError("scale: must be positive")
        if not self.du > 0:
            raise ConfigError("du: must be positive")
        if self.workers is not None and int(self.workers) < 1:
            raise ConfigError("workers: must be at least 1")
        self.beta, self.seed, self.paths = float(self.beta), int(self.seed), int(self.paths)

    def axis(self, name: str) -> GridAxis | None:
        return next((g for g in self.grid if g.name == name), None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = [str(g) for g in self.grid]
        return d


def _as_list(v):
    if v is None:
        return []
    if isinstance(v, str):
        return [s for s in v.split(",") if s.strip()]
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def valid_keys() -> list:
    return [f.name for f in fields(RunConfig)]


def load_config(path: str | Path | None = None, **flags) -> RunConfig:
    """Read a flat JSON object (optional) and apply ``flags`` on top; ``None`` flags are ignored."""
    values = {}
    if path is not None:
        try:
            values = json.loads(Path(path).read_text() or "{}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a JSON object of key-value pairs")
    values.update({k: v for k, v in flags.items() if v is not None})
    unknown = sorted(set(values) - set(valid_keys()))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}; valid keys: {', '.join(valid_keys())}")
    if "command" not in values:
        raise ConfigError("command: required")
    return RunConfig(**values)


# -- tables ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_table(rows, columns, meta: dict, fmt: str = "csv", path: str | Path | None = None):
    """Write ``rows`` (sequences matching ``columns``); metadata always carries the tool version and seed."""
    meta = {"version": __version__, **meta}
    meta.setdefault("seed", None)
    if fmt == "json":
        doc = {"meta": meta, "columns": list(columns),
               "rows": [[_json_value(v) for v in r] for r in rows]}
        text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        for k, v in meta.items():
            buf.write(f"# {k}: {json.dumps(_json_value(v), sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    else:
        raise ConfigError(f"format: must be one of {', '.join(FORMATS)}")
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def _json_value(v):
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _parse_cell(s):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path: str | Path):
    """Inverse of :func:`write_table`: returns ``(meta, columns, rows)``."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc["meta"], doc["columns"], doc["rows"]
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = json.loads(v)
        else:
            body.append(line)
    rd = list(csv.reader(body))
    return meta, rd[0], [[_parse_cell(c) for c in r] for r in rd[1:]]
