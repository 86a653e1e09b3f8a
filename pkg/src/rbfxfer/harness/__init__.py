"""Synthetic fields, experiment runner, reports and the ``xfer`` CLI."""
from .fields import AnalyticField, FieldKind, generate_field, make_field
from .experiment import DEFAULT_RADIUS, ExperimentConfig, run_experiment, scaling_study
from .report import Histogram, MethodResult, TransferReport, det_stats, emit_report, load_report
