"""Command-line entry point ``xfer``.

Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure of a method.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..fieldxfer import MethodKind, build_operator, transfer_scalar, transfer_tensor
from ..io import (
    DISPLACEMENT_COLUMNS,
    SCALAR_COLUMNS,
    TENSOR_COLUMNS,
    FormatError,
    read_field,
    read_points,
    write_points,
    write_table,
)
from ..pointcloud import RadiusConfig, StructuredGrid, gauss_points
from ..sparse import SolverConfig
from .experiment import DEFAULT_RADIUS, ExperimentConfig, run_experiment
from .fields import FieldKind, generate_field
from .report import Histogram, MethodResult, TransferReport, det_stats, emit_report

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("rbfxfer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected nx,ny,nz")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("expected three integers") from None


def _floats3(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="xfer", description="RBF field transfer between point clouds")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a method comparison from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides config 'output')")

    tr = sub.add_parser("transfer", help="transfer a field between two point files")
    tr.add_argument("--src", required=True)
    tr.add_argument("--src-field", required=True)
    tr.add_argument("--dst", required=True)
    tr.add_argument("--method", required=True, choices=[m.value for m in MethodKind])
    tr.add_argument("--M", type=int, default=None)
    tr.add_argument("--alpha", type=float, default=None)
    tr.add_argument("--tol", type=float, default=1e-10)
    tr.add_argument("--threads", type=int, default=1)
    tr.add_argument("--out", required=True)

    gen = sub.add_parser("gen", help="write a synthetic field on Gauss points")
    gen.add_argument("--kind", required=True, choices=[k.value for k in FieldKind])
    gen.add_argument("--grid", required=True, type=_triple)
    gen.add_argument("--q", type=int, default=1, choices=(1, 2, 3))
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--lo", type=_floats3, default=(0.0, 0.0, 0.0))
    gen.add_argument("--hi", type=_floats3, default=(1.0, 1.0, 1.0))
    gen.add_argument("--params", default="{}", help="JSON object of field parameters")
    gen.add_argument("--out", required=True)
    return p


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_dict(json.load(fh))
    out = args.out or cfg.output
    if not out:
        raise FormatError("no output directory: pass --out or set 'output' in the config")
    report = run_experiment(cfg)
    emit_report(report, out)
    for m in report.methods:
        if m.ok:
            log.info("%-10s det in [%.4g, %.4g]", m.name, m.det_min, m.det_max)
        else:
            log.info("%-10s FAILED: %s", m.name, m.error)
    return EXIT_NUMERIC if report.failed else EXIT_OK


def _cmd_transfer(args) -> int:
    method = MethodKind.parse(args.method)
    src = read_points(args.src, distinct=True)
    dst = read_points(args.dst)
    kind, data = read_field(args.src_field)
    if data.shape[0] != src.count:
        raise FormatError(f"{args.src_field}: {data.shape[0]} rows for {src.count} points")
    if kind == "tensor" and method is MethodKind.RBF_D_GRAD:
        raise FormatError("rbf-d needs a displacement field (dx,dy,dz)")
    if kind == "displacement" and method is not MethodKind.RBF_D_GRAD:
        raise FormatError(f"{method.value} needs a tensor field (F11..F33)")

    default = DEFAULT_RADIUS[method]
    cfg = RadiusConfig(
        M=args.M if args.M is not None else default.M,
        alpha=args.alpha if args.alpha is not None else default.alpha,
    )
    os.makedirs(args.out, exist_ok=True)
    config = {
        "src": args.src, "src_field": args.src_field, "dst": args.dst,
        "method": method.value, "M": cfg.M, "alpha": cfg.alpha,
        "tol": args.tol, "threads": args.threads, "field_kind": kind,
    }
    res = MethodResult(name=method.value, threads=args.threads, n_src=src.count, n_dst=dst.count)
    report = TransferReport(config=config, source_stats={})
    report.methods.append(res)
    try:
        import time

        t0 = time.perf_counter()
        op = build_operator(src, dst, cfg, SolverConfig(tol=args.tol), threads=args.threads)
        t1 = time.perf_counter()
        if kind == "scalar":
            values, iters = transfer_scalar(op, data, return_iterations=True)
            t2 = time.perf_counter()
            write_table(os.path.join(args.out, "field.csv"), SCALAR_COLUMNS, values)
        else:
            if kind == "tensor":
                out, iters = transfer_tensor(op, method, data, return_iterations=True) \
                    if method is MethodKind.RBF_F_E else _svd(op, data)
                report.source_stats = det_stats(np.linalg.det(data))
            else:
                out, iters = transfer_tensor(op, method, displacement=data, return_iterations=True)
            t2 = time.perf_counter()
            write_table(os.path.join(args.out, "field.csv"), TENSOR_COLUMNS, out.values.reshape(-1, 9))
            det = out.det()
            for k, v in det_stats(det).items():
                if k != "count":
                    setattr(res, k, v)
            lo, hi = float(det.min()), float(det.max())
            if report.source_stats:
                lo = min(lo, report.source_stats["det_min"])
                hi = max(hi, report.source_stats["det_max"])
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            res.histogram = Histogram.build(det, lo, hi, 60)
        res.gmres_iters = {"build": dict(op.build_iterations), "per_field": [int(i) for i in iters]}
        res.time_ms = {"init": 1e3 * (t1 - t0), "evaluate": 1e3 * (t2 - t1)}
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
        log.error("%s", res.error)
    emit_report(report, args.out)
    return EXIT_NUMERIC if report.failed else EXIT_OK


def _svd(op, data):
    out, details = transfer_tensor(op, MethodKind.RBF_F_SVD, data, return_details=True)
    return out, details.iterations


def _cmd_gen(args) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise FormatError(f"--params is not valid JSON: {exc}") from None
    grid = StructuredGrid(args.lo, args.hi, args.grid)
    ps = gauss_points(grid, args.q)
    disp, field, _ = generate_field(args.kind, params, ps, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_points(os.path.join(args.out, "points.csv"), ps)
    write_table(os.path.join(args.out, "field.csv"), TENSOR_COLUMNS, field.values.reshape(-1, 9))
    if disp is not None:
        nodes = grid.nodes()
        write_points(os.path.join(args.out, "nodes.csv"), nodes)
        from .fields import make_field

        d_nodes = make_field(args.kind, params, args.seed).d(nodes.points)
        write_table(os.path.join(args.out, "displacement.csv"), DISPLACEMENT_COLUMNS, d_nodes)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    handlers = {"run": _cmd_run, "transfer": _cmd_transfer, "gen": _cmd_gen}
    try:
        return handlers[args.command](args)
    except (OSError, FormatError, ValueError, KeyError, TypeError) as exc:
        print(f"xfer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
