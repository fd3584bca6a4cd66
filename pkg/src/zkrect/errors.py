"""Exception types shared across the package."""


class ZkError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ZkError, ValueError):
    """Invalid configuration; collects every problem found, not just the first."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ShapeError(ZkError, ValueError):
    """Array arguments whose shapes do not line up."""


class GridError(ZkError, ValueError):
    """Grid too coarse or otherwise unusable for the requested operation."""


class DomainError(ZkError, ValueError):
    """Evaluation requested outside the admissible domain (e.g. x > 0)."""


class InvalidParameterError(ZkError, ValueError):
    """Scalar parameter outside its admissible range."""


class InvalidInputError(ZkError, ValueError):
    """Input field violates a required trace/support precondition."""


class BranchSelectionError(ZkError, ArithmeticError):
    """Root-branch tracking reached an analytically impossible state."""


class StepFailureError(ZkError, RuntimeError):
    """Inner fixed-point iteration failed to converge within its budget."""

    def __init__(self, message, iteration_trace=None):
        super().__init__(message)
        self.iteration_trace = list(iteration_trace or [])


class DivergenceError(ZkError, ArithmeticError):
    """Non-finite values appeared in the evolving state."""


class IncompleteTrajectoryError(ZkError, ValueError):
    """Trajectory lacks the stored data required by the requested report."""


class NearUncontrollableError(ZkError, RuntimeError):
    """Gramian CG stagnated; the target is numerically out of reach.

    Carries ``ritz_min``, the smallest Ritz-value estimate accumulated by the
    CG run, as a conditioning diagnostic.
    """

    def __init__(self, message, ritz_min=None, residuals=None):
        super().__init__(message)
        self.ritz_min = ritz_min
        self.residuals = list(residuals or [])


class DataTooLargeError(ZkError, RuntimeError):
    """Nonlinear fixed point is not contracting for the given data size."""

    def __init__(self, message, distances=None):
        super().__init__(message)
        self.distances = list(distances or [])
