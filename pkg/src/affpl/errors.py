"""Exception hierarchy shared by all affpl modules."""


class AffplError(Exception):
    """Base class for all errors raised by this package."""


class NonConvexPolygon(AffplError):
    """Domain polygon is not convex (or is degenerate)."""


class SpacingTooCoarse(AffplError):
    """Lattice spacing too large relative to the polygon in-radius."""


class NotConvex(AffplError):
    """Nodal values fail the discrete convexity (lower-envelope) test."""


class RadiusTooLarge(AffplError):
    """Mollification radius leaves no room for the shrunken domain."""


class DegenerateHessian(AffplError):
    """An operation required a positive discrete Hessian determinant."""


class LinearSolveFailure(AffplError):
    """Sparse linear solve failed or returned non-finite values."""


class Infeasible(AffplError):
    """Problem data admits no solution (e.g. non-convex boundary data)."""


class MaxIterations(AffplError):
    """Iteration budget exhausted before reaching the tolerance."""


class ContinuationStalled(AffplError):
    """Fixed-point residual stopped decreasing during continuation.

    Carries the best iterate found so far in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class AscentStalled(AffplError):
    """Concave ascent could not improve the objective further."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DegenerateRegion(AffplError):
    """Region has too few non-collinear points for an enclosing ellipse."""


class ConfigError(AffplError):
    """CLI configuration is invalid; the message names the offending key."""


class SolverError(AffplError):
    """Wrapper for solver failures propagated through the CLI."""
