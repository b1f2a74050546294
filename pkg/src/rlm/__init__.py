"""Riemannian Levenberg-Marquardt for nonlinear least squares on manifolds."""

from .errors import (
    ContractViolation,
    DegenerateModelDecrease,
    EvaluationError,
    InfeasibleError,
    InsufficientData,
    RankDropError,
)
from .lsq import AffineProblem, FdReport, FunctionProblem, ResidualProblem, fd_check
from .solver import (
    PRESETS,
    RlmConfig,
    audit_iteration,
    estimate_order,
    rho,
    rlm_run,
    solve_subproblem,
    theta,
    update_mu,
)
from .trace import IterRecord, RunSummary, Status

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "AffineProblem",
    "ContractViolation",
    "DegenerateModelDecrease",
    "EvaluationError",
    "FdReport",
    "FunctionProblem",
    "InfeasibleError",
    "InsufficientData",
    "IterRecord",
    "RankDropError",
    "ResidualProblem",
    "RlmConfig",
    "RunSummary",
    "Status",
    "audit_iteration",
    "estimate_order",
    "fd_check",
    "rho",
    "rlm_run",
    "solve_subproblem",
    "theta",
    "update_mu",
]
