"""
End-to-end field transfer between two point clouds.

A :class:`TransferOperator` holds everything that depends only on point
locations (radii, interpolation and evaluation matrices, the cardinal
preconditioner and the coefficients of the constant-one interpolant). It
is built once and then reused for any number of fields.

Three ways of moving a deformation gradient are provided:

* ``RBF_F_E``   -- each of the nine Cartesian components separately;
* ``RBF_F_SVD`` -- aligned SVD, quaternions and log singular values, which
  keeps ``det F > 0`` at every destination point;
* ``RBF_D_GRAD`` -- transfer the displacement, differentiate the rescaled
  interpolant analytically and add the identity.
"""
from __future__ import annotations

import enum
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .pointcloud import PointSet, RadiusConfig, TENSOR_RADIUS, adaptive_radii
from .rbf import (
    DENOMINATOR_FLOOR,
    UncoveredDestinationError,
    Interpolant,
    RescaledInterpolant,
    assemble_eval_gradient,
    assemble_eval_matrix,
    assemble_interp_matrix,
    build_cardinal_preconditioner,
    build_interpolant,
    rescaled_gradient,
)
from .sparse import INNER_SOLVER, SolverConfig, _row_blocks
from .tensor import (
    CANONICAL_TRIPLET,
    NonPositiveDeterminantError,
    align_svd,
    det3,
    quaternion_to_rotation,
    svd3,
)

__all__ = (
    "MethodKind",
    "TensorField",
    "TransferOperator",
    "SVDTransferDetails",
    "build_operator",
    "transfer_scalar",
    "transfer_tensor_euclidean",
    "transfer_tensor_svd",
    "transfer_displacement_gradient",
    "transfer_tensor",
)

# Aligned quaternions with |a| below this are reported as close to a
# half-turn, where the a >= 0 hemisphere choice is discontinuous.
NEAR_PI_SCALAR = 1e-3


class MethodKind(enum.Enum):
    RBF_D_GRAD = "rbf-d"
    RBF_F_E = "rbf-f-e"
    RBF_F_SVD = "rbf-f-svd"

    @classmethod
    def parse(cls, value) -> "MethodKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        for m in cls:
            if key.lower() in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown method {value!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class TensorField:
    """One 3x3 tensor per point of ``points``."""

    points: PointSet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.points.count, 3, 3):
            raise ValueError(
                f"expected {(self.points.count, 3, 3)} tensor samples, got {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    def det(self) -> np.ndarray:
        return det3(self.values)


@dataclass
class TransferOperator:
    src: PointSet
    dst: PointSet
    radius_cfg: RadiusConfig
    solver: SolverConfig
    radii: np.ndarray
    phi_int: object
    phi_eval: object
    precond: object
    ones: Interpolant
    ref: np.ndarray = field(default_factory=lambda: CANONICAL_TRIPLET.copy())
    threads: int = 1
    build_iterations: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    assembly_counts: Counter = field(default_factory=Counter)
    _den: np.ndarray | None = None
    _grad: tuple | None = None
    _blocks: dict = field(default_factory=dict)

    @property
    def n_src(self) -> int:
        return self.src.count

    @property
    def n_dst(self) -> int:
        return self.dst.count

    @property
    def denominator(self) -> np.ndarray:
        """Constant-one interpolant evaluated at the destinations."""
        return self._den

    def eval_gradient(self):
        """Kernel-gradient evaluation matrices, assembled on first use."""
        if self._grad is None:
            self._grad = assemble_eval_gradient(self.dst, self.src, self.radii, self.threads)
            self.assembly_counts["eval_gradient"] += 1
        return self._grad

    def row_blocks(self, threads: int):
        """Destination row ranges with their slice of ``phi_eval``, cached."""
        if threads not in self._blocks:
            self._blocks[threads] = [
                (a, b, self.phi_eval[a:b]) for a, b in _row_blocks(self.n_dst, threads)
            ]
        return self._blocks[threads]

    def solve(self, values) -> tuple[np.ndarray, list[int]]:
        """Interpolation coefficients for one or more source fields."""
        interp = build_interpolant(
            self.src, values, self.radii, self.precond, self.solver, phi_int=self.phi_int
        )
        return interp.coeffs, [st.iterations for st in interp.stats]

    def rescaled(self, coeffs) -> RescaledInterpolant:
        return RescaledInterpolant(Interpolant(self.src, self.radii, coeffs), self.ones)


def build_operator(
    src: PointSet,
    dst: PointSet,
    cfg: RadiusConfig = TENSOR_RADIUS,
    solver: SolverConfig = SolverConfig(),
    ref=CANONICAL_TRIPLET,
    *,
    inner: SolverConfig = INNER_SOLVER,
    precondition: bool = True,
    threads: int = 1,
) -> TransferOperator:
    """Assemble every location-dependent piece of the transfer.

    Raises
    ------
    UncoveredDestinationError
        If a destination point lies outside all source supports.
    """
    src = PointSet.source(src)
    dst = dst if isinstance(dst, PointSet) else PointSet(dst)
    counts = Counter()
    timings = {}

    t0 = time.perf_counter()
    radii = adaptive_radii(src, cfg, workers=threads)
    phi_int = assemble_interp_matrix(src, radii, workers=threads)
    counts["interp"] += 1
    phi_eval = assemble_eval_matrix(dst, src, radii, workers=threads)
    counts["eval"] += 1
    timings["assembly"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if precondition:
        P_inv, inner_iters = build_cardinal_preconditioner(phi_int, src, radii, inner)
        counts["preconditioner"] += 1
    else:
        P_inv, inner_iters = None, 0
    timings["preconditioner"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ones = build_interpolant(src, np.ones(src.count), radii, P_inv, solver, phi_int=phi_int)
    timings["ones"] = time.perf_counter() - t0

    op = TransferOperator(
        src=src,
        dst=dst,
        radius_cfg=cfg,
        solver=solver,
        radii=radii,
        phi_int=phi_int,
        phi_eval=phi_eval,
        precond=P_inv,
        ones=ones,
        ref=np.array(ref, dtype=float),
        threads=threads,
        build_iterations={"inner": inner_iters, "ones": ones.stats[0].iterations},
        timings=timings,
        assembly_counts=counts,
    )
    den = np.asarray(phi_eval @ ones.coeffs)
    low = ~(den >= DENOMINATOR_FLOOR)
    if np.any(low):
        i = int(np.flatnonzero(low)[0])
        raise UncoveredDestinationError(i, float(den[i]))
    op._den = den
    return op


def _rescaled_eval(op: TransferOperator, coeffs: np.ndarray, threads: int | None = None):
    threads = op.threads if threads is None else threads
    den = op.denominator
    if threads <= 1:
        num = np.asarray(op.phi_eval @ coeffs)
        return num / den.reshape((-1,) + (1,) * (num.ndim - 1))
    out = np.empty((op.n_dst,) + coeffs.shape[1:])

    def work(block):
        a, b, phi = block
        num = np.asarray(phi @ coeffs)
        out[a:b] = num / den[a:b].reshape((-1,) + (1,) * (num.ndim - 1))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, op.row_blocks(threads)))
    return out


def transfer_scalar(op: TransferOperator, values, *, return_iterations: bool = False):
    """Rescaled RBF transfer of scalar or vector data (componentwise).

    ``values`` has shape ``(n_src,)`` or ``(n_src, k)``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != op.n_src:
        raise ValueError(f"got {values.shape[0]} values for {op.n_src} source points")
    coeffs, iters = op.solve(values)
    out = _rescaled_eval(op, coeffs)
    return (out, iters) if return_iterations else out


def _tensor_values(field_or_array, n_src: int) -> np.ndarray:
    vals = field_or_array.values if isinstance(field_or_array, TensorField) else field_or_array
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (n_src, 3, 3):
        raise ValueError(f"expected tensor samples of shape {(n_src, 3, 3)}, got {vals.shape}")
    return vals


def transfer_tensor_euclidean(op: TransferOperator, field, *, return_iterations=False):
    """Nine independent rescaled transfers of the Cartesian components."""
    F = _tensor_values(field, op.n_src)
    out, iters = transfer_scalar(op, F.reshape(op.n_src, 9), return_iterations=True)
    res = TensorField(op.dst, out.reshape(op.n_dst, 3, 3))
    return (res, iters) if return_iterations else res


@dataclass(frozen=True)
class SVDTransferDetails:
    """Intermediate quantities of an SVD transfer, per destination point."""

    log_sigma: np.ndarray
    qU: np.ndarray
    qV: np.ndarray
    source_near_pi: int
    iterations: list
    time_solve: float
    time_evaluate: float


def _source_channels(F: np.ndarray, ref) -> tuple[np.ndarray, int]:
    """Eleven scalar channels per source point: qU (4), qV (4), log sigma (3)."""
    d = det3(F)
    bad = ~(d > 0.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonPositiveDeterminantError(i, float(d[i]))
    al = align_svd(svd3(F), ref)
    near_pi = int(np.sum(np.abs(al.qU[:, 0]) < NEAR_PI_SCALAR) + np.sum(np.abs(al.qV[:, 0]) < NEAR_PI_SCALAR))
    return np.hstack([al.qU, al.qV, np.log(al.sigma)]), near_pi


def _recompose(channels: np.ndarray, offset: int = 0) -> np.ndarray:
    try:
        U = quaternion_to_rotation(channels[:, 0:4])
        V = quaternion_to_rotation(channels[:, 4:8])
    except ArithmeticError as exc:
        if getattr(exc, "index", None) is not None:
            exc.index += offset
            exc.args = (f"interpolated {exc.args[0]} (destination point {exc.index})",)
        raise
    sigma = np.exp(channels[:, 8:11])
    return np.einsum("pik,pk,pjk->pij", U, sigma, V)


def transfer_tensor_svd(
    op: TransferOperator, field, *, return_details: bool = False, threads: int | None = None
):
    """Positivity-preserving transfer of a deformation-gradient field.

    Each source tensor is decomposed and aligned; the eight quaternion
    components of ``U`` and ``V`` and the three log singular values are
    transferred as scalars, and ``F = U diag(exp(log sigma)) V^T`` is
    rebuilt at each destination. ``det F`` is then a product of three
    exponentials and cannot be negative or zero.
    """
    F = _tensor_values(field, op.n_src)
    threads = op.threads if threads is None else threads
    t0 = time.perf_counter()
    channels, near_pi = _source_channels(F, op.ref)
    coeffs, iters = op.solve(channels)
    t1 = time.perf_counter()

    if threads <= 1:
        dst_channels = _rescaled_eval(op, coeffs, 1)
        out = _recompose(dst_channels)
    else:
        den = op.denominator
        dst_channels = np.empty((op.n_dst, 11))
        out = np.empty((op.n_dst, 3, 3))

        def work(block):
            a, b, phi = block
            dst_channels[a:b] = np.asarray(phi @ coeffs) / den[a:b, None]
            out[a:b] = _recompose(dst_channels[a:b], offset=a)

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, op.row_blocks(threads)))
    t2 = time.perf_counter()

    res = TensorField(op.dst, out)
    if not return_details:
        return res
    details = SVDTransferDetails(
        log_sigma=dst_channels[:, 8:11],
        qU=dst_channels[:, 0:4],
        qV=dst_channels[:, 4:8],
        source_near_pi=near_pi,
        iterations=iters,
        time_solve=t1 - t0,
        time_evaluate=t2 - t1,
    )
    return res, details


def transfer_displacement_gradient(op: TransferOperator, displacement, *, return_iterations=False):
    """``F = I + grad`` of the rescaled interpolant of the displacement.

    ``displacement`` has shape ``(n_src, 3)``; the gradient is evaluated in
    closed form with the quotient rule at the destination points.
    """
    d = np.asarray(displacement, dtype=float)
    if d.shape != (op.n_src, 3):
        raise ValueError(f"expected displacement of shape {(op.n_src, 3)}, got {d.shape}")
    coeffs, iters = op.solve(d)
    grad = rescaled_gradient(op.rescaled(coeffs), op.phi_eval, op.eval_gradient())
    # grad[p, k, c] = d(d_c)/dx_k, so F_ck = delta_ck + grad[p, k, c]
    F = np.eye(3) + np.swapaxes(grad, 1, 2)
    res = TensorField(op.dst, F)
    return (res, iters) if return_iterations else res


def transfer_tensor(op: TransferOperator, method, field=None, displacement=None, **kw):
    """Dispatch on :class:`MethodKind`."""
    method = MethodKind.parse(method)
    if method is MethodKind.RBF_F_SVD:
        return transfer_tensor_svd(op, field, **kw)
    if method is MethodKind.RBF_F_E:
        return transfer_tensor_euclidean(op, field, **kw)
    if displacement is None:
        raise ValueError("the displacement-gradient method needs displacement samples")
    return transfer_displacement_gradient(op, displacement, **kw)
