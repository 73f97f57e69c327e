"""Measurement-based computation: open graphs, flow, brickwork, Toffoli."""

from .compiler import compile_toffoli, toffoli_matrix
from .execute import run_pattern_plain
from .graph import (
    Flow,
    FlowReport,
    MeasurementPattern,
    OpenGraph,
    brickwork,
    canonical_flow,
    dependencies,
    dump_pattern,
    validate_flow,
)

__all__ = [
    "Flow",
    "FlowReport",
    "MeasurementPattern",
    "OpenGraph",
    "brickwork",
    "canonical_flow",
    "compile_toffoli",
    "dependencies",
    "dump_pattern",
    "run_pattern_plain",
    "toffoli_matrix",
    "validate_flow",
]
