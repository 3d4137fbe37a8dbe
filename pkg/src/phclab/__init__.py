"""Numerics for pseudo-holomorphic surfaces of a degenerate 2-form on S^1 x B^3."""
from . import cone_dynamics, energetics, errors, geometry, limits, local_graphs, surfaces, vertex
from .cone_dynamics import ConeSolution, find_c_for_period, half_period_quad, period_from_ode, period_series
from .energetics import delta_c, integrate_form, mu_profile, sigma_profile
from .limits import classify_limit, count_intersections, dilate, geometric_distance
from .local_graphs import (GraphGrid, extract_graph, kappas, residual_8_1, residual_8_3,
                           residual_8_5, residual_8_26, taylor_fit)
from .surfaces import holomorphy_residual, make_family
from .vertex import VertexModeSolution, mode_orthogonality, vertex_mode

__version__ = "0.1.0"

__all__ = [
    "cone_dynamics", "energetics", "errors", "geometry", "limits", "local_graphs",
    "surfaces", "vertex", "ConeSolution", "find_c_for_period", "half_period_quad",
    "period_from_ode", "period_series", "delta_c", "integrate_form", "mu_profile",
    "sigma_profile", "classify_limit", "count_intersections", "dilate", "geometric_distance",
    "GraphGrid", "extract_graph", "kappas", "residual_8_1", "residual_8_3", "residual_8_5",
    "residual_8_26", "taylor_fit", "holomorphy_residual", "make_family", "VertexModeSolution",
    "mode_orthogonality", "vertex_mode",
]
