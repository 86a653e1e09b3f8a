"""CSV readers and writers for point clouds and point-aligned fields."""
from __future__ import annotations

import csv

import numpy as np

from .pointcloud import PointSet

__all__ = (
    "POINT_COLUMNS",
    "SCALAR_COLUMNS",
    "TENSOR_COLUMNS",
    "DISPLACEMENT_COLUMNS",
    "read_table",
    "write_table",
    "read_points",
    "write_points",
    "read_field",
)

POINT_COLUMNS = ("x", "y", "z")
SCALAR_COLUMNS = ("value",)
TENSOR_COLUMNS = tuple(f"F{i}{j}" for i in range(1, 4) for j in range(1, 4))
DISPLACEMENT_COLUMNS = ("dx", "dy", "dz")


class FormatError(ValueError):
    pass


def read_table(path, columns) -> np.ndarray:
    """Read a headed CSV whose header must be exactly ``columns``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if tuple(header) != tuple(columns):
            raise FormatError(f"{path}: expected header {','.join(columns)}, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns):
                raise FormatError(f"{path}:{lineno}: expected {len(columns)} values, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: not a number") from None
            if not all(np.isfinite(vals)):
                raise FormatError(f"{path}:{lineno}: NaN or infinite value")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, len(columns))


def write_table(path, columns, data) -> None:
    data = np.asarray(data, dtype=float).reshape(-1, len(columns))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def read_points(path, distinct: bool = False) -> PointSet:
    pts = read_table(path, POINT_COLUMNS)
    if pts.shape[0] == 0:
        raise FormatError(f"{path}: no points")
    return PointSet(pts, distinct=distinct)


def write_points(path, ps) -> None:
    write_table(path, POINT_COLUMNS, ps.points if isinstance(ps, PointSet) else ps)


def read_field(path):
    """Read a field CSV, detecting its kind from the header.

    Returns ``(kind, data)`` where kind is ``"scalar"`` (shape ``(N,)``),
    ``"tensor"`` (``(N, 3, 3)``) or ``"displacement"`` (``(N, 3)``).
    """
    with open(path, newline="") as fh:
        header = tuple(h.strip() for h in next(csv.reader(fh), []))
    if header == SCALAR_COLUMNS:
        return "scalar", read_table(path, SCALAR_COLUMNS)[:, 0]
    if header == TENSOR_COLUMNS:
        return "tensor", read_table(path, TENSOR_COLUMNS).reshape(-1, 3, 3)
    if header == DISPLACEMENT_COLUMNS:
        return "displacement", read_table(path, DISPLACEMENT_COLUMNS)
    raise FormatError(f"{path}: unrecognized field header {','.join(header)}")
