"""Exception hierarchy.

Errors fall in two families: configuration problems (bad input, points
outside a validity window) and numerical failures (quadrature that does not
converge, brackets that cannot be closed, spectra leaving [0, 1]).  The command
line maps the first family to exit status 2 and the second to exit status 3.
"""


class FockError(Exception):
    """Base class for all package errors."""


class ConfigError(FockError, ValueError):
    """Invalid user input or configuration."""


class DomainError(ConfigError):
    """A pointwise quantity was requested where it is not defined."""


class WindowError(ConfigError):
    """A point or cell lies outside the region where a truncation is valid."""


class CoverageError(ConfigError):
    """A point is not covered by the cell partition."""


class DisjointnessError(ConfigError):
    """Cells that were required to be disjoint overlap."""


class InsufficientDataError(ConfigError):
    """Too few usable observations for a fit or test."""


class TableError(ConfigError):
    """A tabulated weight or inverse-CDF table is malformed."""


class NumericError(FockError, ArithmeticError):
    """A numerical procedure failed to reach its accuracy target."""


class QuadratureError(NumericError):
    """Quadrature did not converge; ``residual`` holds the last estimate."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class BracketingError(NumericError):
    """A root bracket could not be closed below the maximal radius."""


class TailDivergenceError(NumericError):
    """A radial moment integral does not converge at infinity."""


class RankCapError(NumericError):
    """The requested accuracy needs a truncation rank above the cap."""


class SpectrumError(NumericError):
    """Eigenvalues of a restriction matrix left [0, 1] beyond tolerance."""


class DegenerateDiskError(NumericError):
    """A disk carries zero mass so a ratio is undefined."""


class EnvelopeError(NumericError):
    """The rejection envelope of a sampler is invalid or too loose."""
