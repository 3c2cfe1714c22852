"""Binary field snapshots, diagnostic CSV and run manifests.

Snapshot layout (all little-endian)::

    b"CSF1" | u32 nx | u32 ny | f64 t | nx*ny f64 values, row-major (i + nx*j)

Grid lengths are not stored; readers supply them (default unit square).
"""

from __future__ import annotations

import math
import os
import struct
from pathlib import Path

import numpy as np

from .core import DIAG_COLUMNS, DiagRecord, Field, make_grid

MAGIC = b"CSF1"
_HEADER = struct.Struct("<4sIId")


class SnapshotError(ValueError):
    """Malformed, truncated or non-finite snapshot file."""


def write_snapshot(f: Field, t: float, path) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.nx, g.ny, float(t)))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path, lx: float = 1.0, ly: float = 1.0) -> tuple[Field, float]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header ({len(data)} bytes)")
    magic, nx, ny, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise SnapshotError(f"{path}: expected {expected} bytes for {nx}x{ny}, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    if not (np.all(np.isfinite(values)) and math.isfinite(t)):
        raise SnapshotError(f"{path}: non-finite payload")
    try:
        grid = make_grid(nx, ny, lx, ly)
    except ValueError as exc:
        raise SnapshotError(f"{path}: {exc}") from exc
    return Field(grid, values), t


def snapshot_name(field_name: str, index: int) -> str:
    return f"{field_name}_t{index:06d}.csf"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv_header(path, columns) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")


def append_row(path, values) -> None:
    with open(path, "a", newline="") as fh:
        fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in values) + "\n")


def append_diag(record: DiagRecord, path) -> None:
    """Append one diagnostic row, writing the header first if the file is new or empty."""
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        write_csv_header(path, DIAG_COLUMNS)
    append_row(path, record.as_tuple())


def write_table(path, columns, rows) -> None:
    write_csv_header(path, columns)
    for row in rows:
        append_row(path, row)


def write_manifest(path, lines) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line.rstrip("\n") + "\n")
