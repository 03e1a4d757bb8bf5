"""File emissions.  Every CSV and JSON file starts with the same metadata block.

CSV layouts (after the ``#`` header lines)::

    counting.csv         t, N, complete
    psi_sample.csv       x_1..x_dim, value, stderr, cone_half_angle
    cone.csv             x_1..x_dim, supporting_word
    growth_form.csv      kind, x_1..x_dim       (kind = coeffs | u)
    cylinder_masses.csv  word, mass
    primitive.csv        t, N

Floats are written with ``repr`` so bodies are bit-stable for identical
inputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def header_lines(config_hash: str, completeness_radius: float | None, extra: dict | None = None) -> list[str]:
    lines = [f"orbcount {__version__}", f"config_hash: {config_hash}",
             f"completeness_radius: {_num(completeness_radius) if completeness_radius is not None else 'n/a'}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return lines


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence], header: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for h in header:
            fh.write(f"# {h}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_num(x) for x in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Body of an emitted CSV (header comments skipped): (columns, rows)."""
    with open(path) as fh:
        body = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(body))
    return rows[0], rows[1:]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def write_json(path: str | Path, payload: dict, header: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": header_dict(header), "result": _jsonable(payload)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def header_dict(header: Sequence[str]) -> dict:
    out = {"tool": header[0]}
    for h in header[1:]:
        k, _, v = h.partition(": ")
        out[k] = v
    return out
