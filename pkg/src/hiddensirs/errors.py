"""Exception hierarchy shared across the package.

Each class carries the process exit code the command line tool maps it to.
"""


class HiddenSirsError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(HiddenSirsError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(HiddenSirsError):
    """Malformed input data or insufficient coverage."""

    exit_code = 3


class NumericalError(HiddenSirsError):
    """Numerical failure (degenerate likelihood, non-convergence, bad covariance)."""

    exit_code = 4
