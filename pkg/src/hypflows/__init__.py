"""Locally constrained curvature flows of starshaped hypersurfaces in hyperbolic space.

Submodules: ``sphere`` (grids and calculus on S^n), ``geometry`` (radial-graph
geometry in H^{n+1}), ``symmetric`` (normalized elementary symmetric
functions), ``profiles`` (radial and weight profiles), ``flow`` (time
integration), ``functionals`` (integral quantities and inequalities) and
``cli`` (experiment runner).
"""

from .flow import FlowConfig, FlowState, ICFLaw, MCFLaw, TimeSeries, advance, flow_velocity, run_flow
from .functionals import InequalityReport, curvature_integrals, enclosed_quantities, michael_simon_report
from .geometry import GeometryData, GraphHypersurface, graph_geometry
from .profiles import RadialProfile, WeightProfile, profile_from_fhat, weight_from_ode
from .sphere import GridMode, SphereGrid, build_grid

__all__ = [
    "FlowConfig", "FlowState", "ICFLaw", "MCFLaw", "TimeSeries", "advance", "flow_velocity", "run_flow",
    "InequalityReport", "curvature_integrals", "enclosed_quantities", "michael_simon_report",
    "GeometryData", "GraphHypersurface", "graph_geometry",
    "RadialProfile", "WeightProfile", "profile_from_fhat", "weight_from_ode",
    "GridMode", "SphereGrid", "build_grid",
]
