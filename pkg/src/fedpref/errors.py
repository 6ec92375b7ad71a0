"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Structural mismatch: incompatible layer counts or layer dimensions."""


class NumericError(ArithmeticError):
    """Numeric failure (non-finite values, non-convergence, singular systems).

    Optional context attributes locate the failure: ``round_index`` for
    federated runs, ``step_index`` for local training, ``iterations`` for
    iterative solvers.
    """

    def __init__(self, message, *, round_index=None, step_index=None, iterations=None):
        super().__init__(message)
        self.round_index = round_index
        self.step_index = step_index
        self.iterations = iterations


class ConfigError(ValueError):
    """Invalid or missing experiment configuration; ``field`` names the culprit."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field
