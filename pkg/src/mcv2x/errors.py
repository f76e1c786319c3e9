"""Exception hierarchy shared by every module."""


class CoverageError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(CoverageError, ValueError):
    pass


class SingularityError(InvalidArgumentError):
    """A base station sits exactly on the receiver (zero distance)."""


class OrderingError(InvalidArgumentError):
    """Distances passed to an ordered-region formula are not strictly ascending."""


class DivisionGuardError(CoverageError, ZeroDivisionError):
    pass


class InsufficientDeploymentError(CoverageError):
    """Fewer base stations were drawn than the connectivity order needs."""


class AccuracyError(CoverageError):
    """Quadrature failed to reach the requested tolerance.

    ``estimates`` holds the last two values produced by the refinement loop.
    """

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class ConfigError(CoverageError):
    """Config file could not be parsed or violates the schema."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


class ValidationError(ConfigError):
    """Parameters parse but violate a physical invariant."""
