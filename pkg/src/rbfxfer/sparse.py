"""
Sparse storage and iterative solvers.

Matrices are :class:`scipy.sparse.csr_matrix` instances in canonical form
(sorted, unique column indices per row). The Krylov solver is a restarted,
right-preconditioned GMRES written here so that iteration counts, breakdown
handling and the reported residual are under our control.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

__all__ = (
    "SolverConfig",
    "SolveStats",
    "GMRESBreakdown",
    "csr_from_triplets",
    "spmv",
    "gmres",
    "gauss_seidel_apply",
)

SparseMatrix = sp.csr_matrix
Operator = Union[sp.spmatrix, np.ndarray]


class GMRESBreakdown(ArithmeticError):
    """Arnoldi produced a zero vector while the residual was still too large."""


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    maxiter: int = 1000
    restart: int = 50

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tol}")
        if self.maxiter < 1:
            raise ValueError(f"maxiter must be >= 1, got {self.maxiter}")
        if self.restart < 1:
            raise ValueError(f"restart must be >= 1, got {self.restart}")


INNER_SOLVER = SolverConfig(tol=1e-1, maxiter=200, restart=50)


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    converged: bool


def csr_from_triplets(rows: int, cols: int, triplets) -> sp.csr_matrix:
    """Assemble a canonical CSR matrix; repeated ``(i, j)`` entries are summed.

    ``triplets`` is either an iterable of ``(i, j, value)`` or a tuple of
    three equal-length arrays ``(i, j, values)``.
    """
    if isinstance(triplets, tuple) and len(triplets) == 3 and np.ndim(triplets[0]) == 1:
        i, j, v = (np.asarray(t) for t in triplets)
    else:
        t = list(triplets)
        if t:
            i, j, v = (np.asarray(c) for c in zip(*t))
        else:
            i = j = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
    i = i.astype(np.int64, copy=False)
    j = j.astype(np.int64, copy=False)
    v = v.astype(float, copy=False)
    if i.size:
        if i.min() < 0 or i.max() >= rows:
            raise IndexError(f"row index out of range [0, {rows})")
        if j.min() < 0 or j.max() >= cols:
            raise IndexError(f"column index out of range [0, {cols})")
    if not np.all(np.isfinite(v)):
        raise ValueError("matrix values must be finite")
    A = sp.csr_matrix((v, (i, j)), shape=(rows, cols))
    A.sum_duplicates()
    A.sort_indices()
    return A


def _row_blocks(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def spmv(A: sp.spmatrix, x, threads: int = 1) -> np.ndarray:
    """CSR matrix-vector (or matrix-block) product, optionally split over rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has {x.shape[0]} rows")
    if threads <= 1 or A.shape[0] < 4 * threads:
        return np.asarray(A @ x)
    A = sp.csr_matrix(A)
    y = np.empty((A.shape[0],) + x.shape[1:])

    def work(block):
        a, b = block
        y[a:b] = A[a:b] @ x

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, _row_blocks(A.shape[0], threads)))
    return y


def _as_apply(A) -> Callable[[np.ndarray], np.ndarray]:
    if callable(A) and not isinstance(A, (np.ndarray, sp.spmatrix)):
        return A
    return lambda v: np.asarray(A @ v).ravel()


def gmres(
    A: Operator,
    b,
    precond=None,
    cfg: SolverConfig = SolverConfig(),
    x0=None,
) -> tuple[np.ndarray, SolveStats]:
    """Restarted GMRES with right preconditioning.

    Solves ``A P^{-1} y = b`` and returns ``x = P^{-1} y``, so the residual
    being minimized is that of the original system.

    Parameters
    ----------
    A : sparse matrix, ndarray or callable
        System operator.
    b : ndarray, shape (n,)
    precond : sparse matrix, ndarray or callable, optional
        Applies ``P^{-1}``.
    cfg : SolverConfig
    x0 : ndarray, optional
        Initial guess, zero by default.

    Returns
    -------
    x : ndarray
    stats : SolveStats
        ``stats.residual`` is ``||b - A x|| / ||b||`` recomputed from the
        returned ``x``, never the Arnoldi estimate.

    Raises
    ------
    GMRESBreakdown
        If the Krylov space becomes invariant before the tolerance is met.
    """
    matvec = _as_apply(A)
    apply_p = _as_apply(precond) if precond is not None else (lambda v: v)
    b = np.asarray(b, dtype=float).ravel()
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side must be finite")
    n = b.shape[0]
    if isinstance(A, (np.ndarray, sp.spmatrix)) and A.shape != (n, n):
        raise ValueError(f"A must be square and match b: {A.shape} vs {n}")

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, True)

    tol = cfg.tol
    m = min(cfg.restart, n)
    iters = 0
    r = b - matvec(x)
    rel = np.linalg.norm(r) / bnorm
    eps = np.finfo(float).eps

    while rel > tol and iters < cfg.maxiter:
        beta = np.linalg.norm(r)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        breakdown = False
        for j in range(m):
            w = matvec(apply_p(V[j]))
            wnorm0 = np.linalg.norm(w)
            # classical Gram-Schmidt, applied twice for orthogonality
            Q = V[: j + 1]
            h = Q @ w
            w = w - Q.T @ h
            dh = Q @ w
            w = w - Q.T @ dh
            H[: j + 1, j] = h + dh
            hnext = np.linalg.norm(w)
            H[j + 1, j] = hnext
            for i in range(j):
                tmp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = tmp
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                breakdown = True
                k = j
                break
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            iters += 1
            k = j + 1
            if hnext <= 10 * eps * wnorm0:
                breakdown = True
                break
            V[j + 1] = w / hnext
            if abs(g[j + 1]) / bnorm <= tol or iters >= cfg.maxiter:
                break
        if k > 0:
            y = scipy.linalg.solve_triangular(H[:k, :k], g[:k], check_finite=False)
            x = x + apply_p(V[:k].T @ y)
        r = b - matvec(x)
        rel = np.linalg.norm(r) / bnorm
        if breakdown and rel > tol:
            raise GMRESBreakdown(
                f"Arnoldi breakdown after {iters} iterations, residual {rel:.3e}"
            )
        if k == 0:
            break
    return x, SolveStats(iters, float(rel), bool(rel <= tol))


def gauss_seidel_apply(A: Operator, r, sweeps: int = 1) -> np.ndarray:
    """``sweeps`` forward Gauss-Seidel sweeps for ``A x = r`` from ``x = 0``."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    r = np.asarray(r, dtype=float)
    dense = isinstance(A, np.ndarray)
    diag = np.diag(A) if dense else A.diagonal()
    if np.any(diag == 0.0):
        i = int(np.flatnonzero(diag == 0.0)[0])
        raise ZeroDivisionError(f"zero diagonal entry at row {i}")
    if dense:
        lower = np.tril(A)

        def solve(v):
            return scipy.linalg.solve_triangular(lower, v, lower=True, check_finite=False)

    else:
        lower = sp.csr_matrix(sp.tril(A, format="csr"))

        def solve(v):
            return spsolve_triangular(lower, v, lower=True)

    x = solve(r)
    for _ in range(sweeps - 1):
        x = x + solve(r - A @ x)
    return x


def gauss_seidel_preconditioner(A: Operator, sweeps: int = 1) -> Callable:
    """Return ``v -> gauss_seidel_apply(A, v, sweeps)`` with the factor cached."""
    dense = isinstance(A, np.ndarray)
    diag = np.diag(A) if dense else A.diagonal()
    if np.any(diag == 0.0):
        i = int(np.flatnonzero(diag == 0.0)[0])
        raise ZeroDivisionError(f"zero diagonal entry at row {i}")
    if not dense:
        A = A.toarray()
    lower = np.tril(A)

    def apply(v):
        x = scipy.linalg.solve_triangular(lower, v, lower=True, check_finite=False)
        for _ in range(sweeps - 1):
            x = x + scipy.linalg.solve_triangular(
                lower, v - A @ x, lower=True, check_finite=False
            )
        return x

    return apply
