"""
Localized RBF interpolation with the C2 Wendland kernel.

Each source point ``x_j`` carries its own support radius ``r_j``; the kernel
translate centred at ``x_j`` is ``phi(|x - x_j|, r_j)``. Because the radius
belongs to the column, the interpolation matrix is not symmetric.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .pointcloud import PointSet
from .sparse import (
    INNER_SOLVER,
    GMRESBreakdown,
    SolverConfig,
    SolveStats,
    csr_from_triplets,
    gauss_seidel_preconditioner,
    gmres,
)

log = logging.getLogger(__name__)

__all__ = (
    "wendland",
    "wendland_grad_factor",
    "assemble_interp_matrix",
    "assemble_eval_matrix",
    "assemble_eval_gradient",
    "build_cardinal_preconditioner",
    "Interpolant",
    "RescaledInterpolant",
    "build_interpolant",
    "build_rescaled",
    "evaluate_rescaled",
    "UncoveredDestinationError",
    "InterpolationError",
    "PreconditionerError",
    "DENOMINATOR_FLOOR",
)

# Rescaling denominators below this mean the point sees no source support.
DENOMINATOR_FLOOR = 1e-8
# Local cardinal systems up to this size are solved densely.
DENSE_LOCAL_LIMIT = 256


class InterpolationError(RuntimeError):
    pass


class UncoveredDestinationError(InterpolationError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(
            f"destination point {index} is not covered by any source support "
            f"(constant interpolant = {value:.3e})"
        )


class PreconditionerError(InterpolationError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        super().__init__(f"cardinal-function solve failed for point {index}: {cause}")


def wendland(t, r):
    """C2 Wendland function ``max(1 - t/r, 0)**4 * (1 + 4 t/r)``."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t < 0):
        raise ValueError("distance must be non-negative")
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    s = t / r
    u = np.maximum(1.0 - s, 0.0)
    out = u**4 * (1.0 + 4.0 * s)
    return out if out.ndim else float(out)


def wendland_grad_factor(t, r):
    """Factor ``c`` such that ``grad_x phi(|x - y|, r) = c * (x - y)``.

    ``dphi/dt = -20 s (1 - s)**3 / r`` with ``s = t/r``, and dividing by
    ``t`` leaves ``-20 (1 - s)**3 / r**2``, finite at ``t = 0``.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    u = np.maximum(1.0 - t / r, 0.0)
    return -20.0 * u**3 / r**2


def _pairs_within(dst: PointSet, src: PointSet, radii, workers=1):
    """Rows ``i`` (dst) and columns ``j`` (src) with ``|x_i - x_j| < r_j``."""
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (src.count,):
        raise ValueError(f"expected {src.count} radii, got shape {radii.shape}")
    if np.any(~np.isfinite(radii)) or np.any(radii <= 0):
        raise ValueError("radii must be positive and finite")
    hits = dst.index.tree.query_ball_point(src.points, radii, workers=workers)
    counts = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
    rows = np.fromiter(
        (i for h in hits for i in h), dtype=np.int64, count=int(counts.sum())
    )
    cols = np.repeat(np.arange(src.count), counts)
    diff = dst.points[rows] - src.points[cols]
    t = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    keep = t < radii[cols]
    return rows[keep], cols[keep], t[keep]


def assemble_eval_matrix(dst: PointSet, src: PointSet, radii, workers: int = 1):
    """``(Phi_eval)_ij = phi(|x_dst_i - x_src_j|, r_j)`` as CSR."""
    rows, cols, t = _pairs_within(dst, src, radii, workers)
    radii = np.asarray(radii, dtype=float)
    vals = wendland(t, radii[cols])
    return csr_from_triplets(dst.count, src.count, (rows, cols, vals))


def assemble_interp_matrix(src: PointSet, radii, workers: int = 1):
    """``(Phi_int)_ij = phi(|x_i - x_j|, r_j)``; unit diagonal, not symmetric."""
    return assemble_eval_matrix(src, src, radii, workers)


def assemble_eval_gradient(dst: PointSet, src: PointSet, radii, workers: int = 1):
    """Three CSR matrices ``G_k`` with ``(G_k)_ij = d/dx_k phi(|x_i - x_j|, r_j)``.

    All share the sparsity pattern of :func:`assemble_eval_matrix` except
    for coincident points, where the kernel gradient vanishes.
    """
    rows, cols, t = _pairs_within(dst, src, radii, workers)
    radii = np.asarray(radii, dtype=float)
    c = wendland_grad_factor(t, radii[cols])
    diff = dst.points[rows] - src.points[cols]
    return tuple(
        csr_from_triplets(dst.count, src.count, (rows, cols, c * diff[:, k]))
        for k in range(3)
    )


def _local_system(pts: np.ndarray, radii: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Dense ``L[..., l, m] = phi(|x_{s_l} - x_{s_m}|, r_{s_m})`` for index sets ``S``."""
    P = pts[S]
    d = P[..., :, None, :] - P[..., None, :, :]
    t = np.sqrt(np.einsum("...k,...k->...", d, d))
    r = radii[S][..., None, :]
    u = np.maximum(1.0 - t / r, 0.0)
    return u**4 * (1.0 + 4.0 * t / r)


# Bound on entries of the batched local-system tensors (memory cap).
_BATCH_ENTRIES = 1 << 19


def _solve_dense_batch(pts, radii, S, pos, group):
    L = _local_system(pts, radii, S)
    rhs = np.zeros(S.shape + (1,))
    rhs[np.arange(len(S)), pos, 0] = 1.0
    try:
        return np.linalg.solve(L, rhs)[..., 0]
    except np.linalg.LinAlgError:
        # locate the offending system for the error message
        for g, Li, p in zip(group, L, pos):
            try:
                np.linalg.solve(Li, np.eye(len(Li))[:, p])
            except np.linalg.LinAlgError as exc:
                raise PreconditionerError(int(g), exc) from exc
        raise


def build_cardinal_preconditioner(
    phi_int,
    src: PointSet,
    radii,
    inner_cfg: SolverConfig = INNER_SOLVER,
    dense_limit: int = DENSE_LOCAL_LIMIT,
):
    """Approximate-cardinal-function preconditioner ``P^{-1}``.

    For every source point ``i`` the neighbor set ``S^i`` is the column
    pattern of row ``i`` of ``phi_int``. The local collocation system
    ``L^i lambda^i = e_i`` is solved and ``lambda^i`` becomes column ``i``
    of ``P^{-1}`` (rows ``S^i``).

    Systems with at most ``dense_limit`` unknowns are solved directly in
    batches of equal size; larger ones use GMRES with a Gauss-Seidel
    preconditioner to relative tolerance ``inner_cfg.tol``.

    Returns
    -------
    P_inv : csr_matrix
    inner_iterations : int
        Total GMRES iterations spent on the large local systems.
    """
    phi_int = sp.csr_matrix(phi_int)
    radii = np.asarray(radii, dtype=float)
    pts = src.points
    n = phi_int.shape[0]
    indptr, indices = phi_int.indptr, phi_int.indices
    sizes = np.diff(indptr)

    out_rows, out_cols, out_vals = [], [], []
    inner_iters = 0
    for size in np.unique(sizes):
        group = np.flatnonzero(sizes == size)
        S = indices[indptr[group][:, None] + np.arange(size)]
        pos = np.argmax(S == group[:, None], axis=1)
        if not np.all(S[np.arange(len(group)), pos] == group):
            i = int(group[np.flatnonzero(S[np.arange(len(group)), pos] != group)[0]])
            raise PreconditionerError(i, ValueError("row has no diagonal entry"))
        if size <= dense_limit:
            lam = np.empty((len(group), size))
            chunk = max(1, _BATCH_ENTRIES // (size * size))
            for a in range(0, len(group), chunk):
                sl = slice(a, a + chunk)
                lam[sl] = _solve_dense_batch(pts, radii, S[sl], pos[sl], group[sl])
        else:
            lam = np.empty((len(group), size))
            for a, (i, Si, p) in enumerate(zip(group, S, pos)):
                Li = _local_system(pts, radii, Si)
                e = np.zeros(size)
                e[p] = 1.0
                try:
                    lam[a], st = gmres(
                        Li, e, precond=gauss_seidel_preconditioner(Li), cfg=inner_cfg
                    )
                except (GMRESBreakdown, ZeroDivisionError) as exc:
                    raise PreconditionerError(int(i), exc) from exc
                inner_iters += st.iterations
        out_rows.append(S.ravel())
        out_cols.append(np.repeat(group, size))
        out_vals.append(lam.ravel())

    if not out_rows:
        return csr_from_triplets(n, n, []), 0
    P_inv = csr_from_triplets(
        n,
        n,
        (np.concatenate(out_rows), np.concatenate(out_cols), np.concatenate(out_vals)),
    )
    return P_inv, inner_iters


@dataclass(frozen=True)
class Interpolant:
    """RBF coefficients on a source cloud.

    ``coeffs`` has one row per source point and one column per field
    (a 1D array for a single field).
    """

    src: PointSet
    radii: np.ndarray
    coeffs: np.ndarray
    stats: tuple = ()

    def evaluate(self, phi_eval) -> np.ndarray:
        return np.asarray(phi_eval @ self.coeffs)

    def __call__(self, x, workers: int = 1) -> np.ndarray:
        ps = x if isinstance(x, PointSet) else PointSet(x)
        return self.evaluate(assemble_eval_matrix(ps, self.src, self.radii, workers))

    def gradient(self, x, workers: int = 1) -> np.ndarray:
        """Gradient at ``x``; shape ``(N, 3)`` or ``(N, 3, nfields)``."""
        ps = x if isinstance(x, PointSet) else PointSet(x)
        G = assemble_eval_gradient(ps, self.src, self.radii, workers)
        return np.stack([np.asarray(Gk @ self.coeffs) for Gk in G], axis=1)


@dataclass(frozen=True)
class RescaledInterpolant:
    """Quotient ``Pi f / Pi g`` with ``g`` the constant function one."""

    f: Interpolant
    g: Interpolant

    def __call__(self, x, workers: int = 1) -> np.ndarray:
        ps = x if isinstance(x, PointSet) else PointSet(x)
        phi = assemble_eval_matrix(ps, self.f.src, self.f.radii, workers)
        return evaluate_rescaled(self, phi)

    def gradient(self, x, workers: int = 1) -> np.ndarray:
        """Quotient-rule gradient ``(grad(Pf) Pg - Pf grad(Pg)) / Pg**2``."""
        ps = x if isinstance(x, PointSet) else PointSet(x)
        phi = assemble_eval_matrix(ps, self.f.src, self.f.radii, workers)
        G = assemble_eval_gradient(ps, self.f.src, self.f.radii, workers)
        return rescaled_gradient(self, phi, G)


def build_interpolant(
    src: PointSet,
    values,
    radii,
    precond=None,
    cfg: SolverConfig = SolverConfig(),
    phi_int=None,
) -> Interpolant:
    """Solve ``Phi_int gamma = values`` column by column with GMRES.

    A column on which the preconditioned iteration stalls is finished
    without the preconditioner, warm-started from where it stopped; the
    reported iteration count covers both runs.

    Raises
    ------
    InterpolationError
        If any column fails to reach ``cfg.tol``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != src.count:
        raise ValueError(f"got {values.shape[0]} values for {src.count} source points")
    if phi_int is None:
        phi_int = assemble_interp_matrix(src, radii)
    cols = values.reshape(src.count, -1)
    coeffs = np.empty_like(cols)
    stats = []
    for k in range(cols.shape[1]):
        x, st = gmres(phi_int, cols[:, k], precond=precond, cfg=cfg)
        if not st.converged and precond is not None:
            log.warning(
                "preconditioned GMRES stalled on field %d (residual %.2e); continuing unpreconditioned",
                k, st.residual,
            )
            x, st2 = gmres(phi_int, cols[:, k], cfg=cfg, x0=x)
            st = SolveStats(st.iterations + st2.iterations, st2.residual, st2.converged)
        coeffs[:, k] = x
        if not st.converged:
            raise InterpolationError(
                f"GMRES did not converge for field {k}: residual {st.residual:.3e} "
                f"after {st.iterations} iterations"
            )
        stats.append(st)
    return Interpolant(src, np.asarray(radii, dtype=float), coeffs.reshape(values.shape), tuple(stats))


def build_rescaled(f: Interpolant, g: Interpolant) -> RescaledInterpolant:
    return RescaledInterpolant(f, g)


def check_coverage(denominator: np.ndarray, floor: float = DENOMINATOR_FLOOR) -> None:
    low = denominator < floor
    if np.any(low):
        i = int(np.flatnonzero(low)[0])
        raise UncoveredDestinationError(i, float(denominator[i]))


def evaluate_rescaled(f: RescaledInterpolant, phi_eval) -> np.ndarray:
    """``(Phi_eval gamma_f) / (Phi_eval gamma_g)`` per destination point."""
    den = np.asarray(phi_eval @ f.g.coeffs).ravel()
    check_coverage(den)
    num = np.asarray(phi_eval @ f.f.coeffs)
    return num / den.reshape((-1,) + (1,) * (num.ndim - 1))


def rescaled_gradient(f: RescaledInterpolant, phi_eval, grads) -> np.ndarray:
    """Gradient of the rescaled interpolant; ``grads`` from :func:`assemble_eval_gradient`."""
    den = np.asarray(phi_eval @ f.g.coeffs).ravel()
    check_coverage(den)
    coeffs = f.f.coeffs.reshape(f.f.coeffs.shape[0], -1)
    num = np.asarray(phi_eval @ coeffs)
    dnum = np.stack([np.asarray(G @ coeffs) for G in grads], axis=1)
    dden = np.stack([np.asarray(G @ f.g.coeffs).ravel() for G in grads], axis=1)
    out = (dnum * den[:, None, None] - num[:, None, :] * dden[:, :, None]) / (
        den[:, None, None] ** 2
    )
    return out[..., 0] if f.f.coeffs.ndim == 1 else out
