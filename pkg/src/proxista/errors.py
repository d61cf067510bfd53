"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not agree."""


class StepTooLargeError(ValueError):
    """The step size violates ``alpha * rho < 1`` (or a policy bound)."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations.

    ``estimates`` carries the best values reached so far.
    """

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class DivergenceError(RuntimeError):
    """A solver's cost blew up. ``trace`` holds the iterations recorded so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SpecError(ValueError):
    """An experiment specification is invalid or inconsistent."""
