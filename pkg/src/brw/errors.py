"""Exception hierarchy shared by all modules.

The CLI maps ``ConfigError``/``DomainError`` to exit code 2 and
``NumericError``/``ResourceError`` to exit code 3.
"""


class BRWError(Exception):
    kind = "error"


class DomainError(BRWError, ValueError):
    """Input outside an operation's domain (unknown vertex, reducible matrix, ...)."""

    kind = "domain"


class ConfigError(BRWError, ValueError):
    """Unknown family, invalid parameters, unusable simulation settings."""

    kind = "config"


class NumericError(BRWError, ArithmeticError):
    """An iterative method failed to converge within its budget."""

    kind = "numeric"


class ResourceError(BRWError, MemoryError):
    """A materialization would exceed the configured memory budget."""

    kind = "resource"
