"""Exception types shared across the package."""


class RlmError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(RlmError, ValueError):
    """An operation was called with arguments outside its contract
    (mismatched base points, wrong shapes, invalid configuration)."""


class RankDropError(RlmError):
    """A fixed-rank retraction produced a matrix of numerical rank < k."""


class EvaluationError(RlmError):
    """A residual, Jacobian or adjoint evaluation produced non-finite values."""

    def __init__(self, what: str, index: int):
        super().__init__(f"non-finite value in {what} at index {index}")
        self.what = what
        self.index = index


class DegenerateModelDecrease(RlmError):
    """The model decrease theta(0) - theta(s) is not positive."""


class InsufficientData(RlmError):
    """Too few usable values to fit a convergence order."""


class InfeasibleError(RlmError):
    """A problem generator was asked for an impossible instance."""
