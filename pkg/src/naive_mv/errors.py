"""Exception types shared across the package.

The CLI maps these onto stable exit codes: domain/assumption failures -> 1,
config parse failures -> 2, numerical failures (non-convergence, grid
misalignment) -> 3.
"""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class AssumptionError(DomainError):
    """A market/target assumption (A1)-(A3) is violated.

    The message names the violated assumption, e.g. "(A2)".
    """


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class AlignmentError(ValueError):
    """A simulation grid is not dyadically aligned with the requested depth."""


class ConfigError(ValueError):
    """A run-configuration file could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
