"""The failure mode that motivates the SVD path.

Half of the box is undeformed, the other half is turned by 180 degrees
about z. Averaging the two componentwise gives diag(0, 0, 1) near the
interface, so the Euclidean transfer produces almost-zero determinants.
The SVD transfer keeps every determinant at exactly one.
"""
import numpy as np

from rbfxfer.harness import ExperimentConfig, run_experiment

cfg = ExperimentConfig(field_kind="rotblend", methods=["rbf-f-e", "rbf-f-svd"])
report = run_experiment(cfg)

print("source det range:", report.source_stats["det_min"], report.source_stats["det_max"])
for m in report.methods:
    print(f"{m.name:10s} det in [{m.det_min:.4f}, {m.det_max:.4f}]  "
          f"below 0.5: {sum(c for e, c in zip(m.histogram.edges, m.histogram.counts) if e < 0.5)}")
