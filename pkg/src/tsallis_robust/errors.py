"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """A model or numerical parameter violates its precondition."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class EquivalenceError(ValueError):
    """A measure change would not be equivalent to the reference measure."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(ValueError):
    """A scenario configuration could not be parsed or validated."""
