"""Numerical checks of curvature identities for minimal hypersurfaces of S^4 with K = 0."""

from .errors import MinHyperError
from .families import Immersion, make_cartan_tube, make_example11, make_example12, make_expr_immersion
from .kernel import DiffConfig
from .scan import GridSpec, AxisGrid, scan_grid
from .shape import PointAnalysis, alpha_coefficients, curvature

__all__ = [
    "AxisGrid",
    "DiffConfig",
    "GridSpec",
    "Immersion",
    "MinHyperError",
    "PointAnalysis",
    "alpha_coefficients",
    "curvature",
    "make_cartan_tube",
    "make_example11",
    "make_example12",
    "make_expr_immersion",
    "scan_grid",
]
