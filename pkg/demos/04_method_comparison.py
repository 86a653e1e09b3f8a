"""Three ways to move a deformation gradient, on a smooth stretch field.

rbf-d interpolates the nodal displacement and differentiates it; rbf-f-e
interpolates the nine components; rbf-f-svd interpolates quaternions and
log singular values. Reports go to ./comparison_report.

The twist has the largest SVD error along the diagonal x = y: there two
right singular vectors are equally close to e1, the alignment picks
different orderings on either side, and interpolating across that switch
mixes unlike singular values. Determinants stay positive regardless.
"""
import sys

from rbfxfer.harness import ExperimentConfig, emit_report, run_experiment

out = sys.argv[1] if len(sys.argv) > 1 else "comparison_report"
cfg = ExperimentConfig(
    src_grid={"cells": [8, 8, 8]},
    dst_grid={"cells": [12, 12, 12]},
    q_dst=2,
    field_kind="twist",
    field_params={"rate": 2.0},
    error_margin=0.1,
)
report = run_experiment(cfg)
for m in report.methods:
    print(f"{m.name:10s} status={m.status:6s} det [{m.det_min:.3f}, {m.det_max:.3f}] "
          f"max err {m.err_max:.2e}  init {m.time_ms['init']:.0f} ms  eval {m.time_ms['evaluate']:.0f} ms")
print("wrote", *emit_report(report, out), sep="\n  ")
