"""
3x3 tensor kernels: determinant, SVD with singular-vector alignment,
rotation <-> quaternion conversion.

Every function accepts a single tensor of shape ``(3, 3)`` or a stack of
shape ``(N, 3, 3)`` and broadcasts over the leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = (
    "RawSVD",
    "AlignedSVD",
    "CANONICAL_TRIPLET",
    "QUATERNION_NORM_FLOOR",
    "NonPositiveDeterminantError",
    "DegenerateQuaternionError",
    "det3",
    "svd3",
    "align_svd",
    "aligned_svd",
    "rotation_to_quaternion",
    "quaternion_to_rotation",
    "canonical_hemisphere",
)

# Rows are the reference directions w^1, w^2, w^3.
CANONICAL_TRIPLET = np.eye(3)
QUATERNION_NORM_FLOOR = 1e-6


class NonPositiveDeterminantError(ValueError):
    def __init__(self, index, det):
        self.index = index
        self.det = det
        where = "" if index is None else f" at point {index}"
        super().__init__(f"tensor{where} has det = {det:.6g} <= 0")


class DegenerateQuaternionError(ArithmeticError):
    def __init__(self, index, norm):
        self.index = index
        self.norm = norm
        where = "" if index is None else f" at point {index}"
        super().__init__(
            f"quaternion{where} has norm {norm:.3e} below {QUATERNION_NORM_FLOOR:g}"
        )


def _first_bad(mask):
    flat = np.flatnonzero(np.ravel(mask))
    if flat.size == 0:
        return None
    return int(flat[0]) if np.ndim(mask) else None


def det3(F) -> np.ndarray:
    """Determinant by the rule of Sarrus, ``F[0] . (F[1] x F[2])``."""
    F = np.asarray(F, dtype=float)
    return np.einsum("...i,...i->...", F[..., 0, :], np.cross(F[..., 1, :], F[..., 2, :]))


@dataclass(frozen=True)
class RawSVD:
    """``F = U diag(sigma) V^T`` with ``sigma`` non-increasing."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return _compose(self.U, self.sigma, self.V)


@dataclass(frozen=True)
class AlignedSVD:
    """SVD factors reordered against a reference triplet.

    ``U`` and ``V`` are proper rotations, ``sigma`` is positive but no
    longer sorted, and ``qU``/``qV`` are their hemisphere-normalized
    quaternions ``(a, b, c, d)``.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    qU: np.ndarray
    qV: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return _compose(self.U, self.sigma, self.V)


def _compose(U, sigma, V):
    return np.einsum("...ik,...k,...jk->...ij", U, sigma, V)


def svd3(F) -> RawSVD:
    """LAPACK SVD of one or many 3x3 tensors.

    The decomposition is deterministic for a given input; its gauge (column
    signs, order among equal singular values) is whatever LAPACK returns
    and is fixed later by :func:`align_svd`.
    """
    F = np.asarray(F, dtype=float)
    if F.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) tensors, got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("tensor has non-finite entries")
    U, s, Vt = np.linalg.svd(F)
    return RawSVD(U, s, np.swapaxes(Vt, -1, -2))


def align_svd(raw: RawSVD, ref=CANONICAL_TRIPLET) -> AlignedSVD:
    """Reorder and re-orient SVD factors against the reference triplet.

    Column ``k`` of the aligned ``V`` is the remaining right singular vector
    with the largest ``|w^k . v|``, flipped so that ``w^k . v >= 0``; the
    third column takes the sign making ``det V = +1``. Singular values and
    left singular vectors follow in lockstep. Ties pick the lowest index.

    Parameters
    ----------
    raw : RawSVD
        Factors of tensors with positive determinant.
    ref : array_like, shape (3, 3) or (N, 3, 3)
        Rows are ``w^1, w^2, w^3``.
    """
    U = np.asarray(raw.U, dtype=float)
    single = U.ndim == 2
    U = U.reshape((-1, 3, 3))
    V = np.asarray(raw.V, dtype=float).reshape((-1, 3, 3))
    s = np.asarray(raw.sigma, dtype=float).reshape((-1, 3))
    n = U.shape[0]
    W = np.broadcast_to(np.asarray(ref, dtype=float), (n, 3, 3))

    smin = np.min(s, axis=1)
    if np.any(smin <= 0.0):
        i = int(np.flatnonzero(smin <= 0.0)[0])
        raise NonPositiveDeterminantError(None if single else i, 0.0)
    orient = det3(U) * det3(V)
    if np.any(orient <= 0.0):
        i = int(np.flatnonzero(orient <= 0.0)[0])
        raise NonPositiveDeterminantError(
            None if single else i, float(np.prod(s[i]) * orient[i])
        )

    rows = np.arange(n)
    # dots[p, k, i] = w^k . v_i
    dots = np.einsum("pkm,pmi->pki", W, V)

    a1 = np.abs(dots[:, 0, :])
    j1 = np.argmax(a1, axis=1)
    a2 = np.abs(dots[:, 1, :])
    a2[rows, j1] = -1.0
    j2 = np.argmax(a2, axis=1)
    j3 = 3 - j1 - j2

    s1 = np.where(dots[rows, 0, j1] < 0.0, -1.0, 1.0)
    s2 = np.where(dots[rows, 1, j2] < 0.0, -1.0, 1.0)
    v1 = V[rows, :, j1] * s1[:, None]
    v2 = V[rows, :, j2] * s2[:, None]
    v3raw = V[rows, :, j3]
    s3 = np.where(np.einsum("pi,pi->p", np.cross(v1, v2), v3raw) < 0.0, -1.0, 1.0)
    v3 = v3raw * s3[:, None]

    Va = np.stack([v1, v2, v3], axis=-1)
    Ua = np.stack(
        [
            U[rows, :, j1] * s1[:, None],
            U[rows, :, j2] * s2[:, None],
            U[rows, :, j3] * s3[:, None],
        ],
        axis=-1,
    )
    sa = np.stack([s[rows, j1], s[rows, j2], s[rows, j3]], axis=-1)
    qU = rotation_to_quaternion(Ua, check=False)
    qV = rotation_to_quaternion(Va, check=False)
    if single:
        return AlignedSVD(Ua[0], sa[0], Va[0], qU[0], qV[0])
    return AlignedSVD(Ua, sa, Va, qU, qV)


def aligned_svd(F, ref=CANONICAL_TRIPLET) -> AlignedSVD:
    """:func:`svd3` followed by :func:`align_svd`, rejecting ``det F <= 0``."""
    F = np.asarray(F, dtype=float)
    d = det3(F)
    bad = d <= 0.0
    if np.any(bad):
        i = _first_bad(bad)
        raise NonPositiveDeterminantError(i, float(np.ravel(d)[i or 0]))
    return align_svd(svd3(F), ref)


def canonical_hemisphere(q) -> np.ndarray:
    """Pick the representative of ``{q, -q}`` whose first nonzero entry is positive.

    For ``a != 0`` this is simply ``a > 0``; for ``a == 0`` the tie is
    broken on ``b``, then ``c``, then ``d``.
    """
    q = np.array(q, dtype=float)
    nz = q != 0.0
    first = np.argmax(nz, axis=-1)
    lead = np.take_along_axis(q, first[..., None], axis=-1)
    return np.where(lead < 0.0, -q, q)


def rotation_to_quaternion(R, check: bool = True) -> np.ndarray:
    """Unit quaternion ``(a, b, c, d)`` of a rotation matrix, with ``a >= 0``.

    Uses Shepperd's branch selection on the largest of the trace and the
    diagonal entries, which keeps the square root well away from zero near
    rotation angles of 0 and pi.
    """
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) rotations, got {R.shape}")
    if check:
        I = np.eye(3)
        orth = np.max(np.abs(np.swapaxes(R, -1, -2) @ R - I), axis=(-2, -1))
        d = det3(R)
        if np.any(orth > 1e-10) or np.any(np.abs(d - 1.0) > 1e-10):
            raise ValueError("input is not a proper rotation (R^T R != I or det != 1)")

    m00, m01, m02 = R[..., 0, 0], R[..., 0, 1], R[..., 0, 2]
    m10, m11, m12 = R[..., 1, 0], R[..., 1, 1], R[..., 1, 2]
    m20, m21, m22 = R[..., 2, 0], R[..., 2, 1], R[..., 2, 2]
    tr = m00 + m11 + m22
    branch = np.argmax(np.stack([tr, m00, m11, m22], axis=-1), axis=-1)

    q = np.empty(R.shape[:-2] + (4,))
    with np.errstate(divide="ignore", invalid="ignore"):
        # branch 0: a is largest
        a = 0.5 * np.sqrt(np.maximum(1.0 + tr, 0.0))
        q0 = np.stack([a, (m21 - m12) / (4 * a), (m02 - m20) / (4 * a), (m10 - m01) / (4 * a)], -1)
        b = 0.5 * np.sqrt(np.maximum(1.0 + m00 - m11 - m22, 0.0))
        q1 = np.stack([(m21 - m12) / (4 * b), b, (m01 + m10) / (4 * b), (m02 + m20) / (4 * b)], -1)
        c = 0.5 * np.sqrt(np.maximum(1.0 - m00 + m11 - m22, 0.0))
        q2 = np.stack([(m02 - m20) / (4 * c), (m01 + m10) / (4 * c), c, (m12 + m21) / (4 * c)], -1)
        d = 0.5 * np.sqrt(np.maximum(1.0 - m00 - m11 + m22, 0.0))
        q3 = np.stack([(m10 - m01) / (4 * d), (m02 + m20) / (4 * d), (m12 + m21) / (4 * d), d], -1)
    choices = np.stack([q0, q1, q2, q3], axis=-2)
    q = np.take_along_axis(choices, branch[..., None, None], axis=-2)[..., 0, :]
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return canonical_hemisphere(q)


def quaternion_to_rotation(q) -> np.ndarray:
    """Rotation matrix of a (not necessarily unit) quaternion ``(a, b, c, d)``.

    Raises
    ------
    DegenerateQuaternionError
        If ``|q|`` is below :data:`QUATERNION_NORM_FLOOR`.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise ValueError(f"expected (..., 4) quaternions, got {q.shape}")
    norm = np.linalg.norm(q, axis=-1)
    low = ~(norm >= QUATERNION_NORM_FLOOR)
    if np.any(low):
        i = _first_bad(low)
        raise DegenerateQuaternionError(i, float(np.ravel(norm)[i or 0]))
    q = q / norm[..., None]
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (c * c + d * d)
    R[..., 0, 1] = 2 * (b * c - a * d)
    R[..., 0, 2] = 2 * (b * d + a * c)
    R[..., 1, 0] = 2 * (b * c + a * d)
    R[..., 1, 1] = 1 - 2 * (b * b + d * d)
    R[..., 1, 2] = 2 * (c * d - a * b)
    R[..., 2, 0] = 2 * (b * d - a * c)
    R[..., 2, 1] = 2 * (c * d + a * b)
    R[..., 2, 2] = 1 - 2 * (b * b + c * c)
    return R
