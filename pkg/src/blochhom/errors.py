"""Exception hierarchy for blochhom.

Every failure mode carries a dedicated class so callers (and the CLI exit-code
logic) can distinguish configuration mistakes from numerical breakdowns.
"""


class BlochhomError(Exception):
    """Base class for all blochhom errors."""


class ValidationError(BlochhomError):
    """Inconsistent or malformed input data (dimensions, symmetry, config)."""


class GeometryError(BlochhomError):
    """Degenerate lattice geometry (singular basis, unstable enumeration)."""


class PositivityError(BlochhomError):
    """A matrix that must be positive definite is not."""


class DegenerateSymbolError(BlochhomError):
    """The differential symbol loses rank on the unit sphere."""


class ConvergenceError(BlochhomError):
    """An iterative solver did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CertificationError(BlochhomError):
    """A certified bound (Voigt-Reuss, corrector norms, ...) is violated."""


class NondegeneracyError(BlochhomError):
    """The spectral germ falls below its guaranteed lower bound."""


class ThresholdCheckError(BlochhomError):
    """The small-k eigenvalue ratios do not converge to the germ."""


class ConditioningError(BlochhomError):
    """A shifted linear solve is too ill-conditioned to trust."""


class TruncationError(BlochhomError):
    """A requested frequency falls outside the representable window."""


class NumericalError(BlochhomError):
    """Generic numerical failure (eigensolver breakdown, invalid values)."""
