"""Exception types shared across the package.

Each error carries the process exit code the CLI maps it to.
"""


class SharedAutonomyError(Exception):
    exit_code = 1


class ConfigError(SharedAutonomyError, ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    exit_code = 2

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class HorizonExceededError(SharedAutonomyError, RuntimeError):
    exit_code = 4


class InvalidActionError(SharedAutonomyError, ValueError):
    exit_code = 4


class EmptyTrustRegionError(SharedAutonomyError, ValueError):
    exit_code = 4


class DegenerateProfileError(SharedAutonomyError, ValueError):
    exit_code = 2


class NumericError(SharedAutonomyError, ArithmeticError):
    exit_code = 4


class ParseError(SharedAutonomyError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
