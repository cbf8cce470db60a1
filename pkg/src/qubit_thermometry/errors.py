"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the physically or numerically valid domain."""


class ConfigurationError(ValueError):
    """Inconsistent configuration, e.g. a kernel table built for other parameters."""


class QuadratureError(RuntimeError):
    """A frequency integral did not converge within the panel budget.

    Carries the achieved error estimate so callers can decide whether to
    retry with a finer configuration.
    """

    def __init__(self, message, achieved_error=None, kernel=None, t=None):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.kernel = kernel
        self.t = t


class IntegrationError(RuntimeError):
    """The Bloch trajectory left the physical ball beyond the allowed slack."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NumericError(RuntimeError):
    """A numerically inconsistent intermediate result (non-finite input,
    incompatible pure-state derivative, diverging Fisher ratio)."""
