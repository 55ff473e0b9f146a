"""Approximately C1 isogeometric spline spaces on two-patch planar domains.

The package builds mixed-regularity B-spline spaces, exact and
spline-projected gluing data for the interface of a two-patch geometry,
the associated approximately C1 basis, and a Galerkin solver for the
biharmonic equation, together with error/convergence reporting.
"""

from .splines import (
    KnotVector,
    SplineSpace1D,
    TensorSplineSpace,
    make_mixed_space,
    make_uniform_space,
)
from .geometry import Patch, TwoPatchDomain, catalog, load_geometry, save_geometry
from .gluing import (
    ApproxGluingData,
    GluingData,
    classify_as_g1,
    exact_gluing,
    g1_residual,
    modify_beta_for_boundary,
    project_gluing,
)
from .c1_basis import (
    C1Basis,
    InterfaceSpaces,
    build_interface_functions,
    build_interface_spaces,
    split_boundary_dofs,
)
from .assembly import (
    DiscreteSystem,
    QuadratureRule,
    apply_essential_bc,
    assemble,
    build_quadrature,
    solve,
)
from .analysis import (
    ConvergenceReport,
    ErrorRecord,
    eoc,
    error_norms,
    jump_factors,
    jump_norm,
)
from .problems import ManufacturedSolution
from .errors import ConfigError, GeometryError, ProjectionError, SolveError

__version__ = "0.1.0"

__all__ = [
    "KnotVector",
    "SplineSpace1D",
    "TensorSplineSpace",
    "make_uniform_space",
    "make_mixed_space",
    "Patch",
    "TwoPatchDomain",
    "catalog",
    "load_geometry",
    "save_geometry",
    "GluingData",
    "ApproxGluingData",
    "exact_gluing",
    "project_gluing",
    "g1_residual",
    "modify_beta_for_boundary",
    "classify_as_g1",
    "InterfaceSpaces",
    "C1Basis",
    "build_interface_spaces",
    "build_interface_functions",
    "split_boundary_dofs",
    "QuadratureRule",
    "DiscreteSystem",
    "build_quadrature",
    "assemble",
    "apply_essential_bc",
    "solve",
    "ErrorRecord",
    "ConvergenceReport",
    "error_norms",
    "jump_norm",
    "jump_factors",
    "eoc",
    "ManufacturedSolution",
    "ConfigError",
    "GeometryError",
    "ProjectionError",
    "SolveError",
]
