"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Invalid model or configuration parameter."""


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined."""


class ScenarioError(ValueError):
    """The requested construction does not apply to this shape of f."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class AdmissibilityError(RuntimeError):
    """A simulated policy had to be clipped too often to stay admissible."""
