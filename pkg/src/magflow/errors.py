"""Exception types shared across the package."""


class MagflowError(Exception):
    """Base class for all magflow errors."""


class IllConditionedError(MagflowError):
    """Linear solve rejected: condition estimate above the trust threshold."""

    def __init__(self, condition, message=None):
        self.condition = condition
        super().__init__(message or f"similarity matrix ill-conditioned (estimate {condition:.3e})")


class SingularPairError(MagflowError):
    """Two distinct indices sit at zero distance where a positive distance is required."""

    def __init__(self, j, k, message=None):
        self.indices = (j, k)
        super().__init__(message or f"coincident points at indices {j} and {k}")


class ScaleSearchError(MagflowError):
    """A cutoff-scale search could not certify its result."""


class EvaluationError(MagflowError):
    """Objective evaluation produced non-finite values."""

    def __init__(self, bad_indices, message=None):
        self.bad_indices = list(bad_indices)
        super().__init__(message or f"non-finite objective values at points {self.bad_indices}")


class ProposalExhaustedError(MagflowError):
    """No proposal candidate exists outside the current point set."""
