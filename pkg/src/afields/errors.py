"""Exception types raised across the package."""


class AfieldsError(Exception):
    """Base class for package errors."""


class DimensionError(AfieldsError, ValueError):
    pass


class UnsupportedDegree(AfieldsError, ValueError):
    pass


class JacobiViolation(AfieldsError, ValueError):
    pass


class SingularHessian(AfieldsError, ArithmeticError):
    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class NoConvergence(AfieldsError, RuntimeError):
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BoundaryNode(AfieldsError, IndexError):
    pass


class NotEvolutionary(AfieldsError, ValueError):
    pass


class InstabilityDetected(AfieldsError, RuntimeError):
    def __init__(self, message: str, step: int, growth: float):
        super().__init__(message)
        self.step = step
        self.growth = growth
