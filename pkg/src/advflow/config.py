"""Run configuration files.

A configuration is an INI-style text file: ``[section]`` headers followed by
``key = value`` lines.  Every key has a type and most have a default; unknown
keys, missing required keys and malformed values are reported with their line
numbers.  Any key can be overridden from the environment as
``ADVFLOW_<SECTION>_<KEY>``.

Example::

    [experiment]
    name = shrinking-disk
    [grid]
    extent = -1 1 -1 1
    h_ratio = 8
    [density]
    family = constant
    params = 0.5 0.5
    [initial]
    kind = disk
    radius = 0.3
    [flow]
    eps = 0.02
    total_time = 0.04
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "ADVFLOW_"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending line when known."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in re.split(r"[\s,;]+", text.strip()) if t)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> float | None:
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else float(text)


_PARSE = {float: float, int: int, str: str.strip, bool: _bool, "floats": _floats, "opt": _opt_float}


def _fmt(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


# (section, key, type, default); a default of ... marks a required key
SCHEMA: list[tuple[str, str, Any, Any]] = [
    ("experiment", "name", str, "run"),
    ("experiment", "seed", int, 0),
    ("experiment", "out", str, "out"),
    ("grid", "extent", "floats", (-1.0, 1.0, -1.0, 1.0)),
    ("grid", "h", "opt", None),
    ("grid", "h_ratio", float, 8.0),
    ("grid", "omega", str, "full-box"),
    ("density", "family", str, "constant"),
    ("density", "params", "floats", (0.5, 0.5)),
    ("initial", "kind", str, "bayes"),
    ("initial", "center", "floats", ()),
    ("initial", "radius", "opt", None),
    ("initial", "path", str, ""),
    ("flow", "eps", float, ...),
    ("flow", "total_time", float, ...),
    ("flow", "snapshot_every", int, 1),
    ("flow", "band", float, math.inf),
    ("flow", "require_certificate", bool, True),
    ("solver", "tol_gap", "opt", None),
    ("solver", "tol_set", "opt", None),
    ("solver", "max_iters", int, 2000),
    ("solver", "check_every", int, 5),
    ("solver", "coarse_levels", int, 0),
    ("solver", "coarse_iters", int, 300),
    ("solver", "momentum", bool, False),
    ("oracle", "kind", str, "none"),
    ("oracle", "a", float, 0.0),
]

_KEYS = {(s, k): (t, dflt) for s, k, t, dflt in SCHEMA}
SECTIONS = list(dict.fromkeys(s for s, *_ in SCHEMA))
INITIAL_KINDS = ("bayes", "disk", "mask")
ORACLE_KINDS = ("none", "constant", "radial-exp")


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated run configuration; ``values`` maps ``section.key`` to a value."""

    values: Mapping[str, Any] = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def eps(self) -> float:
        return self.values["flow.eps"]

    @property
    def h(self) -> float:
        h = self.values["grid.h"]
        return self.eps / self.values["grid.h_ratio"] if h is None else h

    @property
    def extent(self) -> tuple[tuple[float, float], ...]:
        e = self.values["grid.extent"]
        return tuple((e[i], e[i + 1]) for i in range(0, len(e), 2))

    def replace(self, **changes: Any) -> RunConfig:
        """Copy with ``section_key=value`` changes, re-validated."""
        vals = dict(self.values)
        for k, v in changes.items():
            dotted = k.replace("_", ".", 1)
            if dotted not in vals:
                raise ConfigError(f"unknown key {dotted}")
            vals[dotted] = v
        cfg = RunConfig(vals, self.source)
        _validate(cfg, {})
        return cfg

    def canonical(self) -> str:
        """Serialize every key in schema order."""
        lines = []
        for sec in SECTIONS:
            lines.append(f"[{sec}]")
            for s, k, *_ in SCHEMA:
                if s == sec:
                    lines.append(f"{k} = {_fmt(self.values[f'{s}.{k}'])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _line_index(text: str) -> dict[tuple[str, str], int]:
    where: dict[tuple[str, str], int] = {}
    section = ""
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
            where[(section, "")] = n
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m:
            where[(section, m.group(1).strip().lower())] = n
    return where


def _at(where: Mapping[tuple[str, str], int], sec: str, key: str = "") -> str:
    n = where.get((sec, key))
    return f"line {n}: " if n else ""


def parse_text(text: str, env: Mapping[str, str] | None = None, source: str = "<string>") -> RunConfig:
    """Parse configuration text; ``env`` defaults to ``os.environ``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"{source}: {err}") from None
    where = _line_index(text)
    raw: dict[tuple[str, str], tuple[str, str]] = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{source}: {_at(where, sec)}unknown section [{sec}]")
        for key, value in cp.items(sec):
            if (sec, key) not in _KEYS:
                raise ConfigError(f"{source}: {_at(where, sec, key)}unknown key {key!r} in [{sec}]")
            raw[(sec, key)] = (value, f"{source}: {_at(where, sec, key)}")
    env = os.environ if env is None else env
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        match = [(s, k) for s, k, *_ in SCHEMA if rest == f"{s}_{k}"]
        if not match:
            raise ConfigError(f"environment variable {name} names no configuration key")
        raw[match[0]] = (value, f"environment {name}: ")

    values: dict[str, Any] = {}
    for sec, key, typ, dflt in SCHEMA:
        if (sec, key) in raw:
            text_value, where_txt = raw[(sec, key)]
            try:
                values[f"{sec}.{key}"] = _PARSE[typ](text_value)
            except ValueError:
                tname = {"floats": "list of numbers", "opt": "number or auto"}.get(typ, getattr(typ, "__name__", typ))
                raise ConfigError(f"{where_txt}[{sec}] {key} = {text_value!r} is not a {tname}") from None
        elif dflt is ...:
            raise ConfigError(f"{source}: missing required key {key!r} in [{sec}]")
        else:
            values[f"{sec}.{key}"] = dflt
    cfg = RunConfig(values, source)
    _validate(cfg, where, source)
    return cfg


def _validate(cfg: RunConfig, where: Mapping[tuple[str, str], int], source: str = "") -> None:
    v = cfg.values
    pre = f"{source}: " if source else ""

    def fail(sec: str, key: str, msg: str) -> None:
        raise ConfigError(f"{pre}{_at(where, sec, key)}{msg}")

    e = v["grid.extent"]
    if len(e) not in (2, 4) or any(e[i + 1] <= e[i] for i in range(0, len(e), 2)):
        fail("grid", "extent", f"extent must list lo hi per axis (1D or 2D), got {_fmt(e)}")
    if not v["flow.eps"] > 0:
        fail("flow", "eps", f"eps must be positive, got {v['flow.eps']}")
    if v["flow.total_time"] < 0:
        fail("flow", "total_time", f"total_time must be nonnegative, got {v['flow.total_time']}")
    if v["grid.h"] is None:
        if not v["grid.h_ratio"] >= 1:
            fail("grid", "h_ratio", f"h_ratio = eps/h must be at least 1, got {v['grid.h_ratio']}")
    elif not v["grid.h"] > 0:
        fail("grid", "h", f"h must be positive, got {v['grid.h']}")
    if cfg.eps < cfg.h:
        fail("flow", "eps", f"eps = {cfg.eps} is smaller than the spacing h = {cfg.h}")
    if v["flow.snapshot_every"] < 1:
        fail("flow", "snapshot_every", "snapshot_every must be at least 1")
    if not v["flow.band"] > 0:
        fail("flow", "band", "band must be positive")
    kind = v["initial.kind"]
    if kind not in INITIAL_KINDS:
        fail("initial", "kind", f"initial kind must be one of {', '.join(INITIAL_KINDS)}, got {kind!r}")
    if kind == "disk":
        if v["initial.radius"] is None or not v["initial.radius"] > 0:
            fail("initial", "radius", "a disk initial region needs a positive radius")
        c = v["initial.center"]
        if c and len(c) != len(e) // 2:
            fail("initial", "center", f"center has {len(c)} coordinates, the grid has {len(e) // 2} axes")
    if kind == "mask" and not Path(v["initial.path"]).is_file():
        fail("initial", "path", f"mask file {v['initial.path']!r} does not exist")
    if v["oracle.kind"] not in ORACLE_KINDS:
        fail("oracle", "kind", f"oracle kind must be one of {', '.join(ORACLE_KINDS)}")
    if v["oracle.kind"] != "none" and kind != "disk":
        fail("oracle", "kind", "the radial oracle needs a disk initial region")
    if v["solver.max_iters"] < 0 or v["solver.check_every"] < 1:
        fail("solver", "max_iters", "max_iters must be >= 0 and check_every >= 1")
    for key in ("tol_gap", "tol_set"):
        t = v[f"solver.{key}"]
        if t is not None and not t > 0:
            fail("solver", key, f"{key} must be positive")


def parse_config(path: str | Path, env: Mapping[str, str] | None = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"configuration file {p} does not exist")
    return parse_text(p.read_text(), env, str(p))
