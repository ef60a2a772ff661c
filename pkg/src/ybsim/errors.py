"""Exception types shared across modules."""
import numpy as np


class FitError(RuntimeError):
    """A least-squares fit failed or diverged; ``residuals`` holds the last residual vector."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = None if residuals is None else np.asarray(residuals)


class InsufficientStatistics(RuntimeError):
    pass


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the offending section/field or line."""

    def __init__(self, message, where=""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
