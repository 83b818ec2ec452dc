"""Fixed-point quantization error bounds for explicit MPC control laws."""
from __future__ import annotations

__version__ = "0.1.0"

from .bounds import BoundReport, ReportBatch, compute_reports, control_error_report
from .fixtures import FIXTURES, load_fixture
from .harness import ExperimentConfig, facet_report, run_sweep, sample_states
from .partition import FacetPair, Hyperplane, PwaPartition, load_partition, locate
from .quantize import FixedPointFormat, QuantizedPartition, quantize_partition, quantized_evaluate
from .rescale import compute_scaling, rescale_partition

__all__ = [
    "BoundReport",
    "ExperimentConfig",
    "FIXTURES",
    "FacetPair",
    "FixedPointFormat",
    "Hyperplane",
    "PwaPartition",
    "QuantizedPartition",
    "ReportBatch",
    "compute_reports",
    "compute_scaling",
    "control_error_report",
    "facet_report",
    "load_fixture",
    "load_partition",
    "locate",
    "quantize_partition",
    "quantized_evaluate",
    "rescale_partition",
    "run_sweep",
    "sample_states",
]
