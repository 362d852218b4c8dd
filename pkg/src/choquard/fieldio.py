"""CHQ1 field dumps: one ASCII header line, then ``n^3`` little-endian doubles."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .field import GridSpec, ScalarField

_HEADER = re.compile(r"CHQ1 n=(\d+) L=(\S+) order=row-major endian=little dtype=f64")


def header(grid: GridSpec) -> str:
    return f"CHQ1 n={grid.n} L={grid.half_length!r} order=row-major endian=little dtype=f64"


def write_field(path, u: ScalarField) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((header(u.grid) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return path


def read_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        m = _HEADER.fullmatch(line)
        if not m:
            raise ValueError(f"{path}: not a CHQ1 field dump (header {line[:80]!r})")
        n, L = int(m.group(1)), float(m.group(2))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n**3:
        raise ValueError(f"{path}: expected {n**3} values, found {data.size}")
    return ScalarField(GridSpec(n, L), data.reshape(n, n, n).astype(float))
