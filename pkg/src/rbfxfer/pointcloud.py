"""
Point clouds, exact neighbor search, adaptive RBF radii and quadrature clouds.

A point cloud is stored as a read-only ``(N, 3)`` float array. Neighbor
queries are delegated to :class:`scipy.spatial.cKDTree`, which answers
k-nearest and fixed-radius queries exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

__all__ = (
    "PointSet",
    "NeighborIndex",
    "RadiusConfig",
    "StructuredGrid",
    "build_index",
    "adaptive_radii",
    "gauss_points",
)


class PointSet:
    """Ordered list of 3D points.

    Parameters
    ----------
    points : array_like, shape (N, 3)
        Point coordinates. Must be finite.
    distinct : bool
        If True, reject clouds with repeated points. Source clouds need
        this because duplicate rows make the interpolation matrix singular.
    """

    def __init__(self, points, distinct: bool = False):
        pts = np.array(points, dtype=float, copy=True)
        if pts.ndim == 1 and pts.size == 3:
            pts = pts.reshape(1, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("point set is empty")
        if not np.all(np.isfinite(pts)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(pts), axis=1))[0])
            raise ValueError(f"point {bad} has non-finite coordinates")
        pts.flags.writeable = False
        self._points = pts
        if distinct:
            dup = _first_duplicate(pts)
            if dup is not None:
                raise ValueError(
                    f"duplicate source points: {dup[0]} and {dup[1]} coincide"
                )

    @classmethod
    def source(cls, points) -> "PointSet":
        """Point set usable as interpolation source (pairwise distinct)."""
        if isinstance(points, PointSet):
            points = points.points
        return cls(points, distinct=True)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def count(self) -> int:
        return self._points.shape[0]

    def __len__(self) -> int:
        return self.count

    def __repr__(self) -> str:
        return f"PointSet(count={self.count})"

    @cached_property
    def index(self) -> "NeighborIndex":
        return NeighborIndex(self)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self._points.min(axis=0), self._points.max(axis=0)


def _first_duplicate(pts: np.ndarray):
    order = np.lexsort(pts.T[::-1])
    srt = pts[order]
    same = np.all(srt[1:] == srt[:-1], axis=1)
    if not same.any():
        return None
    k = int(np.flatnonzero(same)[0])
    i, j = sorted((int(order[k]), int(order[k + 1])))
    return i, j


class NeighborIndex:
    """Exact k-NN and radius search over a :class:`PointSet`."""

    def __init__(self, ps: PointSet):
        self.pointset = ps
        self._tree = cKDTree(ps.points)

    @property
    def tree(self) -> cKDTree:
        return self._tree

    def knn(self, x, k: int, workers: int = 1):
        """Return ``(dist, idx)`` of the ``k`` nearest points to each query.

        Results always have a trailing axis of length ``k``.
        """
        if k < 1 or k > self.pointset.count:
            raise ValueError(f"k must be in [1, {self.pointset.count}], got {k}")
        x = np.asarray(x, dtype=float)
        dist, idx = self._tree.query(x, k=[*range(1, k + 1)], workers=workers)
        return dist, idx

    def radius(self, x, r, workers: int = 1):
        """Indices of points within closed distance ``r`` of each query point.

        ``r`` may be a scalar or one radius per query point. A single query
        point returns a sorted index array; several return a list of them.
        """
        x = np.asarray(x, dtype=float)
        out = self._tree.query_ball_point(x, r, workers=workers, return_sorted=True)
        if x.ndim == 1:
            return np.asarray(out, dtype=np.int64)
        return [np.asarray(o, dtype=np.int64) for o in out]


def build_index(ps: PointSet) -> NeighborIndex:
    if ps.count < 1:
        raise ValueError("cannot index an empty point set")
    return ps.index


@dataclass(frozen=True)
class RadiusConfig:
    """Adaptive radius parameters.

    ``M`` is the number of other points the unscaled ball must enclose,
    ``alpha`` the safety factor applied on top of it.
    """

    M: int = 2
    alpha: float = 2.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        # alpha == 1 is admitted: the ball then ends exactly on the M-th
        # neighbor, which gets a zero kernel weight but is otherwise valid.
        if not self.alpha >= 1.0:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")


# Defaults per quantity: scalar (DoF transfer), displacement, deformation gradient.
SCALAR_RADIUS = RadiusConfig(M=1, alpha=2.5)
DISPLACEMENT_RADIUS = RadiusConfig(M=5, alpha=3.0)
TENSOR_RADIUS = RadiusConfig(M=2, alpha=2.0)


def adaptive_radii(ps: PointSet, cfg: RadiusConfig, workers: int = 1) -> np.ndarray:
    """Per-point support radii ``alpha * rbar_j``.

    ``rbar_j`` is the distance from point ``j`` to its ``M``-th nearest
    *other* point, i.e. the smallest closed ball around ``x_j`` that holds
    at least ``M`` other points. Ties need no special care since only the
    distance value is used.
    """
    n = ps.count
    if n < cfg.M + 1:
        raise ValueError(f"need at least M+1={cfg.M + 1} points, got {n}")
    # Source clouds are distinct, so the query point itself is the unique
    # zero-distance hit in column 0.
    dist, _ = ps.index.tree.query(ps.points, k=[cfg.M + 1], workers=workers)
    rbar = dist[:, 0]
    if np.any(rbar <= 0.0):
        j = int(np.flatnonzero(rbar <= 0.0)[0])
        raise ValueError(f"point {j} has {cfg.M} coincident neighbors")
    return cfg.alpha * rbar


@dataclass(frozen=True)
class StructuredGrid:
    """Axis-aligned box split into ``nx * ny * nz`` equal cells."""

    lo: tuple = (0.0, 0.0, 0.0)
    hi: tuple = (1.0, 1.0, 1.0)
    cells: tuple = (1, 1, 1)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        cells = tuple(int(c) for c in self.cells)
        if len(lo) != 3 or len(hi) != 3 or len(cells) != 3:
            raise ValueError("grid needs 3 bounds and 3 cell counts")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"grid extents must be positive: lo={lo}, hi={hi}")
        if any(c < 1 for c in cells):
            raise ValueError(f"cell counts must be >= 1, got {cells}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def cube(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "StructuredGrid":
        return cls((lo,) * 3, (hi,) * 3, (n, n, n))

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.cells)

    def nodes(self) -> PointSet:
        """Cell vertices, i.e. the DoF points of a trilinear discretization."""
        axes = [
            np.linspace(l, h, c + 1) for l, h, c in zip(self.lo, self.hi, self.cells)
        ]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return PointSet(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()]))


def gauss_points(grid: StructuredGrid, q: int) -> PointSet:
    """Tensor-product Gauss-Legendre nodes, ``q`` per direction in every cell.

    Points are grouped by cell, cells in (i, j, k) lexicographic order.
    """
    if q not in (1, 2, 3):
        raise ValueError(f"q must be 1, 2 or 3, got {q}")
    xi, _ = np.polynomial.legendre.leggauss(q)
    ref = 0.5 * (xi + 1.0)  # nodes on [0, 1]
    h = grid.spacing
    lo = np.array(grid.lo)
    nx, ny, nz = grid.cells

    ci, cj, ck = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    corners = lo + np.column_stack([ci.ravel(), cj.ravel(), ck.ravel()]) * h
    a, b, c = np.meshgrid(ref, ref, ref, indexing="ij")
    local = np.column_stack([a.ravel(), b.ravel(), c.ravel()]) * h
    pts = (corners[:, None, :] + local[None, :, :]).reshape(-1, 3)
    return PointSet(pts)
