"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Arguments violate an operation's preconditions (shapes, signs, domains)."""


class ConfigurationError(ValueError):
    """A penalty or solver configuration is inconsistent, e.g. wrong growth constants."""


class SolverFailure(RuntimeError):
    """Every start of the inner solver failed to produce a finite value."""


class ExpressionSyntaxError(ValueError):
    """Problem-file or expression text could not be parsed.

    Attributes
    ----------
    line, column : int
        1-based position of the offending token (column points one past the
        last character when the input ended unexpectedly).
    """

    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class ExpressionDomainError(ArithmeticError):
    """Expression evaluation left the domain of an operation (ln of x <= 0, 1/0, ...)."""

    def __init__(self, message, operation=None):
        super().__init__(message)
        self.operation = operation


class LookupFailure(KeyError):
    """Unknown registry name."""
