"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """A numerical operation failed (rank deficiency, singular system, ...)."""


class NonConvergenceError(NumericsError):
    """Schwarz sweep cap exceeded; carries the convergence history."""

    def __init__(self, message, eps_history):
        super().__init__(message)
        self.eps_history = eps_history


class ConfigError(ValueError):
    """Invalid experiment configuration or config file."""
