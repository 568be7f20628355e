"""Exception hierarchy shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`NumericalError`
to exit code 3; everything else is a plain failure.
"""


class BesiError(Exception):
    """Base class for all package-specific errors."""


class DefiniteMatrixError(BesiError):
    """A matrix that must be symmetric positive definite is not."""


class GeometryError(BesiError):
    """Inconsistent or infeasible source/sensor geometry."""


class DegenerateDataError(BesiError):
    """Data that leaves a solver or evaluator without a well-posed problem."""


class ConfigError(BesiError):
    """Invalid configuration value, file, or combination of options."""


class NumericalError(BesiError):
    """A numerical routine failed to produce a usable result."""


class UnsupportedModelError(BesiError):
    """Requested prior/optimizer combination is not implemented."""
