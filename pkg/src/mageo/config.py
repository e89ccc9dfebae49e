"""INI run configuration.

Example::

    [grid]
    nx = 16
    ny = 16
    nt = 33

    [data]
    builtin = xonly-cos
    amplitude = 0.05

    [schedule]
    eps_start = 0.1
    eps_end = 1e-4
    ratio = 0.31622776601683794

    [solver]
    preconditioner = ilu

    [diagnostics]
    A = 3
    alpha = 0.5

    [output]
    directory = runs/xonly

``[data]`` may give ``phi0`` and ``phi1`` as MAFLD paths (relative to the
config file) instead of ``builtin``; the first t-layer of each file is used.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .solver import NewtonConfig

SECTIONS = ("grid", "data", "schedule", "solver", "diagnostics", "output", "manufactured")
DEFAULT_RATIO = 10 ** -0.5


@dataclass
class RunConfig:
    nx: int
    ny: int
    nt: int
    builtin: str | None = None
    phi0_path: Path | None = None
    phi1_path: Path | None = None
    data_params: dict = field(default_factory=dict)
    eps_start: float = 1e-1
    eps_end: float = 1e-4
    ratio: float = DEFAULT_RATIO
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    A: float = 3.0
    alpha: float = 0.5
    output: Path | None = None
    manufactured: dict = field(default_factory=dict)
    source: Path | None = None
    raw: bytes = b""


def _fail(where: str, msg: str):
    raise ConfigError(f"{where}: {msg}")


def _get(cp, section, key, conv, default=None, required=False):
    where = f"[{section}] {key}"
    if not cp.has_option(section, key):
        if required:
            _fail(where, "missing")
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        _fail(where, f"bad value {raw!r} ({exc})")


def _newton(cp) -> NewtonConfig:
    if not cp.has_section("solver"):
        return NewtonConfig()
    kinds = {f.name: f.type for f in dataclasses.fields(NewtonConfig)}
    kw = {}
    for key in cp.options("solver"):
        if key not in kinds:
            _fail(f"[solver] {key}", f"unknown key (known: {', '.join(kinds)})")
        conv = {"int": int, "float": float}.get(kinds[key], str)
        kw[key] = _get(cp, "solver", key, conv)
    try:
        return NewtonConfig(**kw)
    except ValueError as exc:
        _fail("[solver]", str(exc))


def parse_config(text: str, source: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=str(source or "<config>"))
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    for sec in cp.sections():
        if sec not in SECTIONS:
            _fail(f"[{sec}]", f"unknown section (known: {', '.join(SECTIONS)})")
    if not cp.has_section("grid"):
        _fail("[grid]", "section missing")

    base = source.parent if source else Path.cwd()
    cfg = RunConfig(nx=_get(cp, "grid", "nx", int, required=True),
                    ny=_get(cp, "grid", "ny", int, required=True),
                    nt=_get(cp, "grid", "nt", int, required=True))
    cfg.source = source
    cfg.raw = text.encode("utf-8")

    if cp.has_section("data"):
        cfg.builtin = _get(cp, "data", "builtin", str)
        p0, p1 = _get(cp, "data", "phi0", str), _get(cp, "data", "phi1", str)
        if cfg.builtin and (p0 or p1):
            _fail("[data]", "give either builtin or phi0/phi1, not both")
        if not cfg.builtin:
            if not (p0 and p1):
                _fail("[data]", "need builtin or both phi0 and phi1")
            cfg.phi0_path, cfg.phi1_path = (base / p0).resolve(), (base / p1).resolve()
            for key, p in (("phi0", cfg.phi0_path), ("phi1", cfg.phi1_path)):
                if not p.is_file():
                    _fail(f"[data] {key}", f"file not found: {p}")
        for key in ("amplitude", "shift"):
            val = _get(cp, "data", key, float)
            if val is not None:
                cfg.data_params[key] = val
    else:
        cfg.builtin = "trivial"

    cfg.eps_start = _get(cp, "schedule", "eps_start", float, cfg.eps_start)
    cfg.eps_end = _get(cp, "schedule", "eps_end", float, cfg.eps_end)
    cfg.ratio = _get(cp, "schedule", "ratio", float, cfg.ratio)
    if not (0 < cfg.eps_end <= cfg.eps_start <= 1 and 0 < cfg.ratio < 1):
        _fail("[schedule]", "need 0 < eps_end <= eps_start <= 1 and 0 < ratio < 1")

    cfg.newton = _newton(cp)
    cfg.A = _get(cp, "diagnostics", "a", float, cfg.A)
    cfg.alpha = _get(cp, "diagnostics", "alpha", float, cfg.alpha)
    if not cfg.A > 1:
        _fail("[diagnostics] A", "must exceed 1")
    if not 0 < cfg.alpha < 1:
        _fail("[diagnostics] alpha", "must lie in (0, 1)")

    out = _get(cp, "output", "directory", str)
    if out:
        cfg.output = (base / out).resolve()
    if cp.has_section("manufactured"):
        cfg.manufactured = {k: _get(cp, "manufactured", k, float)
                            for k in cp.options("manufactured")}
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 ({exc})") from exc
    return parse_config(text, path.resolve())
