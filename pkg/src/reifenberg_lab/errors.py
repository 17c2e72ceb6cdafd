"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by the laboratory."""


class DomainError(LabError, ValueError):
    """An argument lies outside the set on which an object is defined."""


class PreconditionError(LabError, ValueError):
    """An operation was called on an input that violates its precondition."""


class DegenerateDomainError(LabError, ValueError):
    """A domain (or its intersection with a ball) is empty or disconnected."""


class NeedsBoundaryError(LabError, IndexError):
    """A stencil reached a node that carries no value."""


class ResolutionError(LabError, ValueError):
    """A requested scale is below what the grid resolves."""


class GeometryError(LabError, ValueError):
    """A probe ray or point leaves the domain."""


class InfeasibleError(LabError, ArithmeticError):
    """A constant-selection system has no admissible solution."""

    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding


class NonConvergenceError(LabError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
