"""Deterministic CSV / JSON emission.

Floats are written with 17 significant digits so every value round-trips
exactly.  Each file starts with ``#`` comment lines echoing the configuration
and the library version.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def header_lines(config_text: str | None, extra: dict | None = None) -> list[str]:
    lines = [f"# ammhl v{__version__}"]
    if extra:
        for k in sorted(extra):
            lines.append(f"# {k}: {extra[k]}")
    if config_text:
        for line in config_text.strip().splitlines():
            lines.append(f"# {line}" if line else "#")
    return lines


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence],
              config_text: str | None = None, extra: dict | None = None) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for line in header_lines(config_text, extra):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_matrix_csv(path: str, columns: Sequence[str], path_ids: np.ndarray, times: np.ndarray,
                     fields: Sequence[np.ndarray], config_text: str | None = None,
                     extra: dict | None = None) -> str:
    """Long-format export of (n_paths, n_times) arrays: path, t, field1, field2, ..."""
    n, m = fields[0].shape
    def rows():
        for p in range(n):
            pid = int(path_ids[p])
            for k in range(m):
                yield (pid, times[k]) + tuple(fld[p, k] for fld in fields)
    return write_csv(path, columns, rows(), config_text, extra)


def _num(v: str) -> float:
    try:
        return float(v)
    except ValueError:
        return float("nan")


def read_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Read a CSV written by :func:`write_csv` back into (columns, float matrix).

    Non-numeric cells (such as a sweep parameter name) become NaN.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[_num(v) for v in ln.split(",")] for ln in lines[1:]]) if len(lines) > 1 \
        else np.empty((0, len(cols)))
    return cols, data


def write_json(path: str, obj) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x)!r}")
