"""Initialization and evaluation time against thread count."""
import os
import warnings

from rbfxfer.harness import ExperimentConfig, scaling_study

cells = int(os.environ.get("CELLS", 24))
cfg = ExperimentConfig(dst_grid={"cells": [cells] * 3}, q_dst=2)
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    rows = scaling_study(cfg, thread_counts=(1, 2, 4))
print(f"{rows[0]['n_src']} sources, {rows[0]['n_dst']} destinations")
for r in rows:
    print(f"{r['threads']} threads: init {r['init_ms']:8.1f} ms   evaluate {r['evaluate_ms']:8.1f} ms")
for w in caught:
    print("note:", w.message)
