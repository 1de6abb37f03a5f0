"""Exception types shared across the package."""


class NliConquerError(Exception):
    """Base class for domain errors; the CLI maps these to exit code 1."""


class QuadratureError(NliConquerError):
    """Raised when an adaptive integration fails to converge."""


class ConfigError(NliConquerError):
    """Raised for invalid configuration values or malformed config files."""
