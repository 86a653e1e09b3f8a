"""
Method comparison and scaling runs on structured-grid point clouds.

Source and destination clouds are Gauss points of two boxes; the
displacement-based method instead reads the displacement at the source
grid vertices, like a nodal finite-element field would be.
"""
from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..fieldxfer import MethodKind, build_operator, transfer_tensor
from ..pointcloud import (
    DISPLACEMENT_RADIUS,
    TENSOR_RADIUS,
    RadiusConfig,
    StructuredGrid,
    gauss_points,
)
from ..sparse import SolverConfig
from ..tensor import det3
from .fields import FieldKind, generate_field
from .report import Histogram, MethodResult, TransferReport, det_stats

__all__ = ("ExperimentConfig", "run_experiment", "scaling_study", "DEFAULT_RADIUS")

log = logging.getLogger(__name__)

DEFAULT_RADIUS = {
    MethodKind.RBF_D_GRAD: DISPLACEMENT_RADIUS,
    MethodKind.RBF_F_E: TENSOR_RADIUS,
    MethodKind.RBF_F_SVD: TENSOR_RADIUS,
}


def _grid_from(d) -> StructuredGrid:
    if isinstance(d, StructuredGrid):
        return d
    return StructuredGrid(tuple(d.get("lo", (0, 0, 0))), tuple(d.get("hi", (1, 1, 1))), tuple(d["cells"]))


@dataclass
class ExperimentConfig:
    src_grid: StructuredGrid = field(default_factory=lambda: StructuredGrid.cube(8))
    q_src: int = 1
    dst_grid: StructuredGrid = field(default_factory=lambda: StructuredGrid.cube(16))
    q_dst: int = 2
    field_kind: str = "stretch"
    field_params: dict = field(default_factory=dict)
    methods: list = field(default_factory=lambda: ["rbf-d", "rbf-f-e", "rbf-f-svd"])
    radius: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    threads: int = 1
    seed: int = 0
    bins: int = 60
    error_margin: float = 0.0
    output: Optional[str] = None

    def __post_init__(self):
        self.src_grid = _grid_from(self.src_grid)
        self.dst_grid = _grid_from(self.dst_grid)
        for q in (self.q_src, self.q_dst):
            if q not in (1, 2, 3):
                raise ValueError(f"quadrature order must be 1, 2 or 3, got {q}")
        FieldKind.parse(self.field_kind)
        self.methods = [MethodKind.parse(m).value for m in self.methods]
        radius = {}
        for k, v in dict(self.radius).items():
            radius[MethodKind.parse(k).value] = v if isinstance(v, RadiusConfig) else RadiusConfig(**v)
        self.radius = radius
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")

    def radius_for(self, method) -> RadiusConfig:
        m = MethodKind.parse(method)
        return self.radius.get(m.value, DEFAULT_RADIUS[m])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radius"] = {m: asdict(self.radius_for(m)) for m in self.methods}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def _interior_mask(points: np.ndarray, grid: StructuredGrid, margin: float) -> np.ndarray:
    if margin <= 0:
        return np.ones(points.shape[0], dtype=bool)
    lo = np.array(grid.lo) + margin
    hi = np.array(grid.hi) - margin
    return np.all((points >= lo) & (points <= hi), axis=1)


def _errors(F: np.ndarray, F_true: np.ndarray, mask: np.ndarray) -> dict:
    diff = (F - F_true)[mask]
    ddet = (det3(F) - det3(F_true))[mask]
    if diff.shape[0] == 0:
        return {}
    comp_max = np.max(np.abs(diff), axis=0)
    comp_rms = np.sqrt(np.mean(diff**2, axis=0))
    return {
        "err_max": float(comp_max.max()),
        "err_rms": float(np.sqrt(np.mean(diff**2))),
        "err_component_max": comp_max.tolist(),
        "err_component_rms": comp_rms.tolist(),
        "err_det_max": float(np.max(np.abs(ddet))),
        "err_det_rms": float(np.sqrt(np.mean(ddet**2))),
    }


def _run_method(method: MethodKind, cfg, src_q, dst, field, disp_nodes, nodes, F_true, mask):
    res = MethodResult(name=method.value, threads=cfg.threads)
    try:
        if method is MethodKind.RBF_D_GRAD:
            if disp_nodes is None:
                raise ValueError(f"field {cfg.field_kind!r} has no displacement")
            src = nodes
        else:
            src = src_q
        res.n_src, res.n_dst = src.count, dst.count
        t0 = time.perf_counter()
        op = build_operator(src, dst, cfg.radius_for(method), cfg.solver, threads=cfg.threads)
        t1 = time.perf_counter()
        if method is MethodKind.RBF_F_SVD:
            out, details = transfer_tensor(op, method, field, return_details=True)
            iters = details.iterations
            res.near_pi_rotations = details.source_near_pi
        else:
            out, iters = transfer_tensor(
                op, method, field, displacement=disp_nodes, return_iterations=True
            )
        t2 = time.perf_counter()
    except Exception as exc:  # one failing method must not abort the others
        log.warning("method %s failed: %s", method.value, exc)
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
        return res, None

    det = out.det()
    if not np.all(np.isfinite(det)):
        res.status = "failed"
        res.error = "non-finite determinant at some destination"
        return res, None
    for k, v in det_stats(det).items():
        if k != "count":
            setattr(res, k, v)
    for k, v in _errors(out.values, F_true, mask).items():
        setattr(res, k, v)
    res.gmres_iters = {"build": dict(op.build_iterations), "per_field": [int(i) for i in iters]}
    res.time_ms = {"init": 1e3 * (t1 - t0), "evaluate": 1e3 * (t2 - t1)}
    return res, det


def run_experiment(cfg: ExperimentConfig) -> TransferReport:
    """Transfer one synthetic field with every requested method.

    Methods run one after another so their timings do not overlap. A
    failing method is recorded with ``status='failed'`` and the error text.
    """
    src_q = gauss_points(cfg.src_grid, cfg.q_src)
    dst = gauss_points(cfg.dst_grid, cfg.q_dst)
    nodes = cfg.src_grid.nodes()
    _, field, truth = generate_field(cfg.field_kind, cfg.field_params, src_q, seed=cfg.seed)
    disp_nodes = truth.d(nodes.points) if truth.d is not None else None
    F_true = truth.F(dst.points)
    mask = _interior_mask(dst.points, cfg.dst_grid, cfg.error_margin)

    src_det = field.det()
    # round-trip through JSON so the stored config compares equal after reload
    config = json.loads(json.dumps(cfg.to_dict()))
    report = TransferReport(config=config, source_stats=det_stats(src_det))
    dets = {}
    for name in cfg.methods:
        method = MethodKind.parse(name)
        res, det = _run_method(method, cfg, src_q, dst, field, disp_nodes, nodes, F_true, mask)
        report.methods.append(res)
        if det is not None:
            dets[res.name] = det

    if report.methods:
        pool = np.concatenate([src_det] + list(dets.values()))
        lo, hi = float(pool.min()), float(pool.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        report.source_histogram = Histogram.build(src_det, lo, hi, cfg.bins)
        for res in report.methods:
            if res.name in dets:
                res.histogram = Histogram.build(dets[res.name], lo, hi, cfg.bins)
    return report


def scaling_study(
    cfg: ExperimentConfig, thread_counts=(1, 2, 4), method="rbf-f-svd", repeats: int = 3
) -> list[dict]:
    """Init and evaluate wall times of one method per thread count.

    The evaluate time is the best of ``repeats`` transfers through the same
    operator. A warning is issued when more threads are not faster.
    """
    method = MethodKind.parse(method)
    src_q = gauss_points(cfg.src_grid, cfg.q_src)
    dst = gauss_points(cfg.dst_grid, cfg.q_dst)
    nodes = cfg.src_grid.nodes()
    _, field, truth = generate_field(cfg.field_kind, cfg.field_params, src_q, seed=cfg.seed)
    src = nodes if method is MethodKind.RBF_D_GRAD else src_q
    disp = truth.d(nodes.points) if truth.d is not None else None

    rows = []
    for n in thread_counts:
        t0 = time.perf_counter()
        op = build_operator(src, dst, cfg.radius_for(method), cfg.solver, threads=n)
        t_init = time.perf_counter() - t0
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            transfer_tensor(op, method, field, displacement=disp)
            best = min(best, time.perf_counter() - t0)
        rows.append({"threads": int(n), "init_ms": 1e3 * t_init, "evaluate_ms": 1e3 * best,
                     "n_src": src.count, "n_dst": dst.count})
    for prev, cur in zip(rows[:-1], rows[1:]):
        if cur["evaluate_ms"] > prev["evaluate_ms"]:
            warnings.warn(
                f"evaluate time grew from {prev['evaluate_ms']:.1f} ms ({prev['threads']} threads) "
                f"to {cur['evaluate_ms']:.1f} ms ({cur['threads']} threads)",
                RuntimeWarning,
                stacklevel=2,
            )
    return rows
