"""
Errors - Exception hierarchy of the solver

Every error derives from SolverError and from the closest builtin, so code
that already catches ValueError or RuntimeError keeps working.
"""


class SolverError(Exception):
    """Base class for all solver errors."""


class ConfigError(SolverError, ValueError):
    """Invalid or unknown configuration entry."""


class DimensionError(SolverError, ValueError):
    """Resolution, mode or parity mismatch between operands."""


class SolvabilityError(SolverError, ValueError):
    """Elliptic problem without a unique solution (e.g. m=0 pure Neumann)."""


class ConditioningError(SolverError, ArithmeticError):
    """A matrix that should be invertible is numerically singular."""


class DtnError(ConditioningError):
    """Single-layer density system could not be solved for a mode."""


class InfluenceBuildError(SolverError, RuntimeError):
    """A homogeneous solve failed while assembling an influence matrix."""


class ImageSpaceError(SolverError, ArithmeticError):
    """Residual vector has a large component outside the matrix image."""


class StepError(SolverError, RuntimeError):
    """Boundary residuals left after the correction pass are too large."""


class CacheIntegrityError(SolverError, RuntimeError):
    """Cached payload does not match the key it was stored under."""
