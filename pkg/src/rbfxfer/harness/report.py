"""Transfer reports: in-memory form, JSON/CSV emission and re-loading."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

__all__ = ("Histogram", "MethodResult", "TransferReport", "emit_report", "load_report", "det_stats")


@dataclass
class Histogram:
    edges: list
    counts: list

    @classmethod
    def build(cls, values, lo: float, hi: float, bins: int) -> "Histogram":
        counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=(lo, hi))
        return cls([float(e) for e in edges], [int(c) for c in counts])

    @property
    def total(self) -> int:
        return int(sum(self.counts))


def det_stats(det) -> dict:
    det = np.asarray(det, dtype=float)
    return {
        "count": int(det.size),
        "det_min": float(det.min()),
        "det_max": float(det.max()),
        "det_mean": float(det.mean()),
        "det_nonpositive": int(np.sum(det <= 0.0)),
    }


@dataclass
class MethodResult:
    name: str
    status: str = "ok"
    error: Optional[str] = None
    det_min: Optional[float] = None
    det_max: Optional[float] = None
    det_mean: Optional[float] = None
    det_nonpositive: Optional[int] = None
    histogram_file: Optional[str] = None
    histogram: Optional[Histogram] = None
    err_max: Optional[float] = None
    err_rms: Optional[float] = None
    err_component_max: Optional[list] = None
    err_component_rms: Optional[list] = None
    err_det_max: Optional[float] = None
    err_det_rms: Optional[float] = None
    gmres_iters: dict = field(default_factory=lambda: {"build": None, "per_field": []})
    time_ms: dict = field(default_factory=lambda: {"init": None, "evaluate": None})
    threads: int = 1
    n_src: Optional[int] = None
    n_dst: Optional[int] = None
    near_pi_rotations: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def from_dict(cls, d: dict) -> "MethodResult":
        d = dict(d)
        if d.get("histogram") is not None:
            d["histogram"] = Histogram(**d["histogram"])
        return cls(**d)


@dataclass
class TransferReport:
    config: dict
    source_stats: dict
    methods: list = field(default_factory=list)
    source_histogram: Optional[Histogram] = None
    scaling: Optional[list] = None

    def method(self, name: str) -> MethodResult:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def failed(self) -> bool:
        return any(not m.ok for m in self.methods)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TransferReport":
        d = dict(d)
        d["methods"] = [MethodResult.from_dict(m) for m in d.get("methods", [])]
        if d.get("source_histogram") is not None:
            d["source_histogram"] = Histogram(**d["source_histogram"])
        return cls(**d)


def _write_histogram(path: str, h: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
            w.writerow([repr(lo), repr(hi), c])


def emit_report(report: TransferReport, path) -> list[str]:
    """Write ``report.json`` and one histogram CSV per method into ``path``.

    Returns the list of files written. Histogram files are referenced from
    the JSON by their base name.
    """
    os.makedirs(path, exist_ok=True)
    written = []
    if report.methods and report.source_histogram is not None:
        fn = os.path.join(path, "hist_source.csv")
        _write_histogram(fn, report.source_histogram)
        written.append(fn)
    for m in report.methods:
        if m.histogram is None:
            continue
        base = f"hist_{m.name}.csv"
        m.histogram_file = base
        fn = os.path.join(path, base)
        _write_histogram(fn, m.histogram)
        written.append(fn)
    fn = os.path.join(path, "report.json")
    with open(fn, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    written.append(fn)
    return written


def load_report(path) -> TransferReport:
    fn = os.path.join(path, "report.json") if os.path.isdir(path) else path
    with open(fn) as fh:
        return TransferReport.from_dict(json.load(fh))


def read_histogram_csv(path) -> Histogram:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    edges = [float(r["bin_lo"]) for r in rows] + ([float(rows[-1]["bin_hi"])] if rows else [])
    return Histogram(edges, [int(r["count"]) for r in rows])
