"""Run configuration: a small ``key = value`` text format.

Grammar (one assignment per line, or several separated by top-level commas)::

    # comment
    preset = schottky2_sym, radius = 12
    half_length = 1.3862943611198906
    generator = [[2, 1], [1, 1]]
    generator = [[2, 0], [0, 0.5]] | [[1, 1], [0, 1]]     # product blocks
    phi = growth-form          # or: norm, or a coefficient list [1, 0, -1]
    window = [6.0, 12.0]

Matrices are bracketed lists of rows in decimal text; blocks of a product
element are separated by ``|``.  Each ``generator`` line adds one generator.
"""

from __future__ import annotations

import ast
import hashlib
import logging
import math
import re
from dataclasses import dataclass, fields, replace
from typing import Any

import numpy as np

from .errors import ConfigurationError
from .lie_sl import DET_RENORMALIZE_TOL, MAX_DIM, GroupElement
from .presets import DEFAULT_HALF_LENGTH, PRODUCT_HALF_LENGTHS, REGISTRY, custom, preset

log = logging.getLogger(__name__)

Matrix = tuple[tuple[float, ...], ...]
Generator = tuple[Matrix, ...]


class ConfigParseError(ConfigurationError):
    """Syntax error anchored at a line and column (both 1-based)."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class RunConfig:
    preset: str = "schottky2_sym"
    generators: tuple[Generator, ...] = ()
    half_length: float | None = None
    half_lengths: tuple[float, float] | None = None
    dim: int = 3
    radius: int = 12
    bin_width: float = 0.25
    window: tuple[float, float] | None = None
    resolution: float = 2.0
    half_angle: float = 10.0
    depth: int = 10
    phi: str | tuple[float, ...] = "auto"
    roof: float | None = None
    mode: str = "free"
    round_tol: float = 1e-9
    margin_tol: float = 1e-3
    threads: int = 1
    seed: int = 0
    out: str = "out"

    @property
    def signature(self) -> tuple[int, ...]:
        return self.build_generators()[0].signature

    def build_generators(self) -> list[GroupElement]:
        if self.preset == "custom":
            return custom([[np.array(b) for b in g] for g in self.generators])
        params: dict[str, Any] = {}
        if self.preset == "schottky2_sym":
            params["half_length"] = self.half_length or DEFAULT_HALF_LENGTH
        elif self.preset == "symm_power_d":
            params["d"] = self.dim
            params["half_length"] = self.half_length or DEFAULT_HALF_LENGTH
        elif self.preset == "product2":
            params["half_lengths"] = self.half_lengths or PRODUCT_HALF_LENGTHS
        return preset(self.preset, **params)


_INT = {"radius": (1, 40), "depth": (2, 16), "threads": (1, 256), "seed": (0, 2 ** 63 - 1), "dim": (2, 5)}
_FLOAT = {"bin_width": (1e-6, 100.0), "resolution": (0.01, 90.0), "half_angle": (0.01, 90.0),
          "half_length": (1e-6, 50.0), "roof": (1e-9, 1e6), "round_tol": (1e-12, 1e-6),
          "margin_tol": (0.0, 1.0)}
_KEYS = {f.name for f in fields(RunConfig)} | {"generator"}
_PRESETS = set(REGISTRY) | {"custom"}


# ---------------------------------------------------------------------------
# Lexing


def _split_assignments(line: str) -> list[tuple[int, str]]:
    """Split at commas outside brackets; returns (0-based start column, text)."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(line):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append((start, line[start:i]))
            start = i + 1
    parts.append((start, line[start:]))
    return parts


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


_NUMBER = re.compile(r"^[\s\[\],+\-0-9.eE]*$")


def _literal(text: str, lineno: int, col: int) -> Any:
    if not _NUMBER.match(text):
        bad = next(i for i, ch in enumerate(text) if not _NUMBER.match(ch))
        raise ConfigParseError(lineno, col + bad + 1, f"unexpected character {text[bad]!r}")
    try:
        return ast.literal_eval(text.strip())
    except (SyntaxError, ValueError) as exc:
        offset = getattr(exc, "offset", None) or 1
        lead = len(text) - len(text.lstrip())
        raise ConfigParseError(lineno, col + lead + offset, f"malformed value {text.strip()!r}") from None


def _matrix(obj: Any, lineno: int, col: int) -> Matrix:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ConfigParseError(lineno, col, "a matrix must be a bracketed list of rows")
    n = len(obj)
    if any(len(r) != n for r in obj):
        raise ConfigParseError(lineno, col, "matrix is not square")
    if n > MAX_DIM:
        raise ConfigParseError(lineno, col, f"matrix dimension {n} exceeds {MAX_DIM}")
    return tuple(tuple(float(x) for x in r) for r in obj)


# ---------------------------------------------------------------------------
# Parsing


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Syntax problems raise :class:`ConfigParseError` with line and column;
    semantic problems (unknown preset, out-of-range values, generators that
    are not unimodular) raise :class:`ConfigurationError`.
    """
    values: dict[str, Any] = {}
    gens: list[Generator] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        for col, part in _split_assignments(line):
            if not part.strip():
                raise ConfigParseError(lineno, col + 1, "empty assignment")
            if "=" not in part:
                raise ConfigParseError(lineno, col + len(part) - len(part.lstrip()) + 1, "expected 'key = value'")
            key_text, val_text = part.split("=", 1)
            key = key_text.strip()
            kcol = col + len(key_text) - len(key_text.lstrip()) + 1
            vcol = col + len(key_text) + 1
            if key not in _KEYS:
                raise ConfigParseError(lineno, kcol, f"unknown key {key!r}")
            if not val_text.strip():
                raise ConfigParseError(lineno, vcol + 1, f"missing value for {key!r}")
            if key == "generator":
                blocks, bcol = [], vcol
                for chunk in val_text.split("|"):
                    blocks.append(_matrix(_literal(chunk, lineno, bcol), lineno, bcol + 1))
                    bcol += len(chunk) + 1
                gens.append(tuple(blocks))
                continue
            if key in values:
                raise ConfigParseError(lineno, kcol, f"duplicate key {key!r}")
            values[key] = _value(key, val_text, lineno, vcol)
    if gens:
        values.setdefault("preset", "custom")
        values["generators"] = tuple(gens)
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def _value(key: str, text: str, lineno: int, col: int) -> Any:
    s = text.strip()
    if key in ("preset", "mode", "out"):
        return s
    if key == "phi":
        if s.startswith("["):
            v = _literal(text, lineno, col)
            if not isinstance(v, list):
                raise ConfigParseError(lineno, col + 1, "phi must be a name or a coefficient list")
            return tuple(float(x) for x in v)
        return s
    if key in ("window", "half_lengths"):
        v = _literal(text, lineno, col)
        if not (isinstance(v, list) and len(v) == 2):
            raise ConfigParseError(lineno, col + 1, f"{key} must be a two-element list")
        return (float(v[0]), float(v[1]))
    if key in _INT:
        try:
            return int(s)
        except ValueError:
            raise ConfigParseError(lineno, col + 1 + len(text) - len(text.lstrip()), f"{key} must be an integer") from None
    try:
        return float(s)
    except ValueError:
        raise ConfigParseError(lineno, col + 1 + len(text) - len(text.lstrip()), f"{key} must be a number") from None


def validate(cfg: RunConfig) -> None:
    if cfg.preset not in _PRESETS:
        raise ConfigurationError(f"unknown preset {cfg.preset!r}; known: {sorted(_PRESETS)}")
    if not cfg.out or any(c in cfg.out for c in "#,=\n[]|") or cfg.out != cfg.out.strip():
        raise ConfigurationError(f"output directory {cfg.out!r} must be a plain path")
    if cfg.mode not in ("free", "dedup"):
        raise ConfigurationError(f"mode must be 'free' or 'dedup', got {cfg.mode!r}")
    for key, (lo, hi) in _INT.items():
        v = getattr(cfg, key)
        if not lo <= v <= hi:
            raise ConfigurationError(f"{key} = {v} outside [{lo}, {hi}]")
    for key, (lo, hi) in _FLOAT.items():
        v = getattr(cfg, key)
        if v is not None and not (lo <= v <= hi and math.isfinite(v)):
            raise ConfigurationError(f"{key} = {v} outside [{lo}, {hi}]")
    if cfg.window is not None and not 0 <= cfg.window[0] < cfg.window[1]:
        raise ConfigurationError(f"window {list(cfg.window)} must satisfy 0 <= lo < hi")
    if isinstance(cfg.phi, str) and cfg.phi not in ("auto", "norm", "growth-form"):
        raise ConfigurationError(f"phi must be 'auto', 'norm', 'growth-form' or a coefficient list, got {cfg.phi!r}")
    if cfg.preset == "custom":
        if not cfg.generators:
            raise ConfigurationError("custom preset needs at least one generator line")
        sig = tuple(len(b) for b in cfg.generators[0])
        for i, g in enumerate(cfg.generators):
            if tuple(len(b) for b in g) != sig:
                raise ConfigurationError(f"generator {i} has block sizes {[len(b) for b in g]}, expected {list(sig)}")
            for j, b in enumerate(g):
                det = float(np.linalg.det(np.array(b)))
                if not abs(det - 1.0) <= DET_RENORMALIZE_TOL:
                    raise ConfigurationError(f"generator {i} block {j} has determinant {det:.6g}, not 1")
    elif cfg.generators:
        raise ConfigurationError(f"generator lines are only allowed with preset = custom, not {cfg.preset!r}")
    if cfg.preset == "product2" and cfg.half_lengths is not None:
        s, t = cfg.half_lengths
        if s <= 0 or t <= 0 or s == t:
            raise ConfigurationError("half_lengths must be two distinct positive numbers")
    if not isinstance(cfg.phi, str):
        dim = sum(cfg.signature)
        if len(cfg.phi) != dim:
            raise ConfigurationError(f"phi has {len(cfg.phi)} coefficients, the Cartan space has dimension {dim}")


# ---------------------------------------------------------------------------
# Serialization


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_matrix(m: Matrix) -> str:
    return "[" + ", ".join("[" + ", ".join(_fmt(x) for x in row) + "]" for row in m) + "]"


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    defaults = RunConfig()
    lines = [f"preset = {cfg.preset}"]
    for f in fields(RunConfig):
        name = f.name
        if name in ("preset", "generators"):
            continue
        v = getattr(cfg, name)
        if v == getattr(defaults, name):
            continue
        if v is None:
            raise ConfigurationError(f"cannot serialize {name} = None over a non-None default")
        if isinstance(v, tuple):
            lines.append(f"{name} = [" + ", ".join(_fmt(x) for x in v) + "]")
        elif isinstance(v, float):
            lines.append(f"{name} = {_fmt(v)}")
        else:
            lines.append(f"{name} = {v}")
    for g in cfg.generators:
        lines.append("generator = " + " | ".join(_fmt_matrix(b) for b in g))
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Digest of the settings that determine results (output directory and thread count excluded)."""
    return hashlib.sha256(serialize_config(replace(cfg, out="out", threads=1)).encode()).hexdigest()[:16]


def override(cfg: RunConfig, **changes) -> RunConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    if "preset" in changes and changes["preset"] != "custom":
        changes.setdefault("generators", ())
    new = replace(cfg, **changes)
    validate(new)
    return new


def clamp_window(window: tuple[float, float] | None, completeness_radius: float) -> tuple[tuple[float, float], list[str]]:
    """Default or clamp a fit window to [0, completeness_radius], with warnings for any change."""
    T = float(completeness_radius)
    if window is None:
        return (0.5 * T, T), []
    lo, hi = window
    notes = []
    if hi > T:
        notes.append(f"fit window end {hi} exceeds the completeness radius {T:.6g}; clamped")
        hi = T
    if lo >= hi:
        notes.append(f"fit window start {lo} is not below the clamped end {hi:.6g}; reset to {0.5 * hi:.6g}")
        lo = 0.5 * hi
    for n in notes:
        log.warning(n)
    return (float(lo), float(hi)), notes
