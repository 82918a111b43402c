"""Exception hierarchy shared by all modules."""


class LiissError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(LiissError):
    """A numerical kernel failed to deliver a result (CLI exit code 3)."""


class NonConvergence(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class SingularPivot(NumericalError):
    pass


class TargetOutOfRange(LiissError, ValueError):
    pass


class InvariantViolation(LiissError, ValueError):
    """A domain object was constructed with data breaking one of its invariants."""


class DimensionMismatch(LiissError, ValueError):
    pass


class NoAdmissibleRegion(LiissError):
    pass


class OutOfRegion(LiissError, ValueError):
    """A bound was queried outside the range on which it is certified."""


class EpsOutOfRange(LiissError, ValueError):
    pass


class DegenerateInput(LiissError, ValueError):
    pass


class ConfigError(LiissError):
    """Malformed experiment configuration (CLI exit code 2)."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ExpressionError(ConfigError):
    """Syntax or name error in a coefficient expression string."""

    def __init__(self, message, text="", position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at column {position + 1} in {text!r}"
        super().__init__(message)
