"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An input value is outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Inconsistent shapes, sizes, or configuration values."""


class DegenerateRangeError(ValueError):
    """A value range collapsed to a point (e.g. constant series)."""


class IntegrationError(RuntimeError):
    """Numerical integration diverged."""


class StepSizeError(RuntimeError):
    """An iterative solver diverged; the step size is too large."""


class NumericError(RuntimeError):
    """A non-finite value appeared during computation."""


class UndefinedMetricError(ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""


class ParseError(ValueError):
    """Malformed input file; the message carries the offending line number."""
