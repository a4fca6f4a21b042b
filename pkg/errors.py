"""Exception types shared by the solvers and the command-line runner."""


class Gas1DError(Exception):
    """Base class for all toolkit errors."""


class PreconditionError(Gas1DError, ValueError):
    """An input violates the documented precondition of an operation."""


class ConvergenceError(Gas1DError):
    """An iterative solver did not reach its tolerance."""


class DomainTooSmallError(ConvergenceError):
    """The minimizer carries mass up to the edge of the computational domain."""


class GridResolutionError(ConvergenceError):
    """A discretized quantity moves by more than the tolerance under refinement."""


class MemoryBudgetError(Gas1DError):
    """A grid diagonalization would exceed the configured number of unknowns."""


class TableValidationError(Gas1DError):
    """A Lieb-Liniger table fails one of its invariant checks."""


class HypothesisCheckError(Gas1DError):
    """A hypothesis of an analytic bound is not satisfied by the supplied data."""

    def __init__(self, hypothesis: str, detail: str = ''):
        self.hypothesis = hypothesis
        message = f"Hypothesis '{hypothesis}' failed"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class InvariantViolation(Gas1DError):
    """An internally asserted invariant did not hold."""
