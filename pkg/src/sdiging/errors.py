"""Exception classes shared across the library."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class ConstructionFailure(RuntimeError):
    """A randomized constructor exhausted its retry budget."""


class CertificationRefused(RuntimeError):
    """Rate certification is not applicable (e.g. no strong convexity)."""


class ReferenceFailure(RuntimeError):
    """The centralized reference solver did not converge."""


class DivergenceError(RuntimeError):
    """An iterate norm exceeded the divergence guard.

    Carries the partial trace collected up to the aborted round so callers
    can still inspect or persist it.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(ValueError):
    """An experiment config file is missing, malformed, or has unknown keys."""
