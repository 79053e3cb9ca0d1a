class DomainError(ValueError):
    """Input outside the mathematical domain of an operation (e.g. non-finite)."""


class ModelError(ValueError):
    """Physically or structurally invalid model description."""


class SolverError(RuntimeError):
    """Nonlinear solve failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IntegrationError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class EstimationError(ValueError):
    """Not enough signal to estimate a quantity."""


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column
