"""affpl: the affine Plateau problem on lattice domains.

Discrete convex functions, Monge-Ampere measures with regular/singular
split, the affine area functional and its first variation, Legendre
duality, solvers for the affine maximal surface equation (second boundary
value problem and penalty maximization), and structural diagnostics.
"""

from .errors import (
    AffplError,
    AscentStalled,
    ConfigError,
    ContinuationStalled,
    DegenerateHessian,
    DegenerateRegion,
    Infeasible,
    LinearSolveFailure,
    MaxIterations,
    NonConvexPolygon,
    NotConvex,
    RadiusTooLarge,
    SolverError,
    SpacingTooCoarse,
)
from .lattice import (
    GridDomain,
    HessianField,
    build_domain,
    disc_domain,
    discrete_hessian,
    gradient,
    integrate,
    square_domain,
)

__version__ = "0.1.0"

__all__ = [
    "AffplError",
    "AscentStalled",
    "ConfigError",
    "ContinuationStalled",
    "DegenerateHessian",
    "DegenerateRegion",
    "GridDomain",
    "HessianField",
    "Infeasible",
    "LinearSolveFailure",
    "MaxIterations",
    "NonConvexPolygon",
    "NotConvex",
    "RadiusTooLarge",
    "SolverError",
    "SpacingTooCoarse",
    "build_domain",
    "disc_domain",
    "discrete_hessian",
    "gradient",
    "integrate",
    "square_domain",
]
