"""Exception taxonomy shared across the package."""


class SubglmError(Exception):
    """Base class for all subglm errors."""


class InvalidInputError(SubglmError):
    """Arguments outside the documented domain (non-finite, bad sizes, bad levels)."""


class DegenerateInputError(SubglmError):
    """Structurally empty or rank-zero inputs (empty subsample, too many active coefficients)."""


class DegenerateWeightsError(SubglmError):
    """All observation weights numerically zero."""


class ConvergenceError(SubglmError):
    """Iteration cap reached before the convergence certificate held."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularMatrixError(SubglmError):
    """A matrix that must be inverted is singular or too ill-conditioned."""


class DimensionCapError(SubglmError):
    """Monte-Carlo covariance dimension d^2 + 2d exceeds the configured cap."""


class InvalidCovarianceError(SubglmError):
    """Covariance estimate has an eigenvalue below the allowed negative floor."""


class InfeasibleProgramError(SubglmError):
    """A row linear program of the constrained inverse fit has no feasible point."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class StudentizationError(SubglmError):
    """Studentized bootstrap requested with a non-positive diagonal scale."""


class UnboundedProgramError(SubglmError):
    """Linear program objective unbounded below (not expected for row programs)."""


class ConfigError(SubglmError):
    """Invalid experiment configuration (CLI exit code 2)."""


class BenchFailureError(SubglmError):
    """More than the tolerated fraction of replications failed (CLI exit code 3)."""
