"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class InvalidLambdaError(InvalidArgumentError):
    """Step size violates ``lambda * (1 + beta**2) < 1``."""


class DivergenceError(ArithmeticError):
    """A state became non-finite.

    ``step`` is the index of the first non-finite state; ``record`` holds
    whatever was recorded before the failure (may be ``None``).
    """

    def __init__(self, step, message=None, record=None):
        self.step = step
        self.record = record
        super().__init__(message or f"non-finite state at step {step}")


class OracleError(RuntimeError):
    pass


class SamplingError(RuntimeError):
    pass


class ConfigError(Exception):
    """Configuration parse or validation failure with a source location."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(message)

    def __str__(self):
        loc = ""
        if self.path is not None:
            loc = str(self.path)
            if self.line is not None:
                loc += f":{self.line}"
                if self.column is not None:
                    loc += f":{self.column}"
            loc += ": "
        return loc + self.args[0]
