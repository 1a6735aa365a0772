"""Flat-file outputs: CSV grids, JSON sidecars, 8-bit PGM previews.

CSV cells use ``repr(float)`` (shortest decimal that round-trips), so a
written grid reloads bit-for-bit.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np


def format_float(v: float) -> str:
    return repr(float(v))


def grid_to_csv(values) -> str:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D grid, got shape {values.shape}")
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in values)


def write_grid_csv(values, path) -> Path:
    path = Path(path)
    path.write_text(grid_to_csv(values), encoding="ascii")
    return path


def read_grid_csv(path) -> np.ndarray:
    rows = [line.split(",") for line in Path(path).read_text(encoding="ascii").splitlines() if line]
    return np.array([[float(c) for c in r] for r in rows], dtype=float)


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, complex numbers and fractions."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_pgm(values, path) -> Path:
    """Binary 8-bit PGM (P5) with linear min-max scaling; the scale goes in a header comment."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    scaled = np.zeros(values.shape) if span == 0 else (values - lo) / span
    pixels = np.rint(scaled * 255).astype(np.uint8)
    rows, cols = values.shape
    header = f"P5\n# linear min-max scaling: 0 -> {format_float(lo)}, 255 -> {format_float(hi)}\n{cols} {rows}\n255\n"
    path = Path(path)
    path.write_bytes(header.encode("ascii") + pixels.tobytes())
    return path


def read_pgm(path) -> tuple[np.ndarray, list[str]]:
    """Return ``(pixels, comments)`` of a P5 file written by :func:`write_pgm`."""
    data = Path(path).read_bytes()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            tokens.extend(line.split())
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data[pos:pos + rows * cols], dtype=np.uint8).reshape(rows, cols)
    return pixels, comments
