"""Finite-element simulation of coupled heat and moisture transport in layered walls."""

from .assembly import BoundaryDrive, ClimateSeries, Field, SegmentDrive, SparseSystem
from .domain import LayerRect, Mesh, admissibility_report, build_domain, triangulate
from .materials import (
    CoefficientSet,
    KiesslParams,
    KunzelParams,
    LinearParams,
    MonotoneCurve,
    StateSample,
    Surface2,
    check_linear_conditions,
    check_structure_conditions,
)
from .stepper import Problem, SimState, StepReport, picard_step, semi_implicit_step, simulate

__version__ = "0.1.0"

__all__ = [
    "BoundaryDrive", "ClimateSeries", "Field", "SegmentDrive", "SparseSystem",
    "LayerRect", "Mesh", "admissibility_report", "build_domain", "triangulate",
    "CoefficientSet", "KiesslParams", "KunzelParams", "LinearParams", "MonotoneCurve",
    "StateSample", "Surface2", "check_linear_conditions", "check_structure_conditions",
    "Problem", "SimState", "StepReport", "picard_step", "semi_implicit_step", "simulate",
]
