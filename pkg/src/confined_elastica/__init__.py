"""Confined elasticae: bending-energy gradient flow for inextensible curves in convex confinements."""

from .confinement import CompositeConfinement, SimpleConfinement, build
from .curve_model import AnalyticCurve, BoundaryCondition, dof_map, generate
from .diagnostics import classify, curvature_profile, normalized_energy, penetration_report
from .flow_solver import FlowParams, FlowState, GradientFlow
from .spline_fe import DiscreteCurve, Mesh, assemble, evaluate, interpolate

__version__ = "0.1.0"

__all__ = [
    "AnalyticCurve",
    "BoundaryCondition",
    "CompositeConfinement",
    "DiscreteCurve",
    "FlowParams",
    "FlowState",
    "GradientFlow",
    "Mesh",
    "SimpleConfinement",
    "assemble",
    "build",
    "classify",
    "curvature_profile",
    "dof_map",
    "evaluate",
    "generate",
    "interpolate",
    "normalized_energy",
    "penetration_report",
]
