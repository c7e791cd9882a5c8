"""Exception types shared across the package."""


class PayoffLabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(PayoffLabError, ValueError):
    """An input violates a documented precondition (bad probability, non-finite payoff, ...)."""


class InfeasibleError(PayoffLabError):
    """Requested strategy parameters produce components outside [0, 1]."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        # list of (component name, value) pairs that left [0, 1]
        self.violations = tuple(violations or ())


class DegenerateChainError(PayoffLabError):
    """The joint Markov chain has no unique stationary distribution, so the
    determinant payoff formula is 0/0.  Callers fall back to discounted payoffs."""


class ConvergenceError(PayoffLabError):
    """An iterative computation hit its cap before reaching tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
