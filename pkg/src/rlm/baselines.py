"""Comparison solvers: Riemannian Gauss-Newton and steepest descent.

Both return a :class:`~rlm.trace.RunSummary` with the same trace layout as
the LM solver. Fields without meaning for a method (``lam``, ``mu``, ``rho``)
are recorded as 0 or nan.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, EvaluationError, RankDropError
from .lsq import ResidualProblem
from .solver import DENSE_MAX_DIM
from .trace import IterRecord, RunSummary, Status


@dataclass(frozen=True)
class GnConfig:
    pinv_tol: float = 1e-12
    max_iter: int = 1000
    grad_tol: float = 1e-8
    f_tol: float = 0.0
    time_budget: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.pinv_tol < 1.0:
            raise ContractViolation("pinv_tol must lie in (0, 1)")


@dataclass(frozen=True)
class SdConfig:
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float | str = 1.0  # a positive number, or "cauchy"
    max_iter: int = 1000
    grad_tol: float = 1e-8
    f_tol: float = 0.0
    time_budget: float = math.inf
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.armijo_c < 1.0:
            raise ContractViolation("armijo_c must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ContractViolation("backtrack_factor must lie in (0, 1)")
        if self.initial_step != "cauchy" and not (isinstance(self.initial_step, (int, float)) and self.initial_step > 0.0):
            raise ContractViolation("initial_step must be positive or 'cauchy'")


def _stop(f, gnorm, k, elapsed, cfg) -> Status | None:
    if gnorm <= cfg.grad_tol:
        return Status.GRAD_TOL
    if cfg.f_tol > 0 and f <= cfg.f_tol:
        return Status.F_TOL
    if k >= cfg.max_iter:
        return Status.MAX_ITER
    if elapsed >= cfg.time_budget:
        return Status.TIME_BUDGET
    return None


def gn_step(p: ResidualProblem, x, F: np.ndarray, pinv_tol: float = 1e-12, basis=None):
    """``-pinv(J) F`` in an orthonormal frame, singular values below
    ``pinv_tol * sigma_1`` discarded."""
    Jt, basis = p.framed_jacobian(x, basis)
    coeffs = -np.linalg.pinv(Jt, rcond=pinv_tol) @ F
    return basis.combine(coeffs)


def rgn_run(p: ResidualProblem, x0, cfg: GnConfig | None = None) -> RunSummary:
    cfg = cfg or GnConfig()
    m = p.manifold
    if m.dim > DENSE_MAX_DIM:
        raise ContractViolation(f"RGN needs intrinsic dimension <= {DENSE_MAX_DIM}, got {m.dim}")
    t0 = time.perf_counter()
    trace: list[IterRecord] = []
    x = x0
    k = 0
    message = ""
    try:
        F = p.residual(x)
        f = 0.5 * float(F @ F)
        gnorm = m.norm(x, p.gradient(x, F))
        while True:
            status = _stop(f, gnorm, k, time.perf_counter() - t0, cfg)
            if status is not None:
                break
            s = gn_step(p, x, F, cfg.pinv_tol)
            step_norm = m.norm(x, s)
            if not math.isfinite(step_norm):
                status, message = Status.STEP_FAILURE, "non-finite Gauss-Newton step"
                break
            rec = IterRecord(k, f, gnorm, 0.0, 0.0, math.nan, step_norm, True, 0, 0.0)
            try:
                x = m.retract(x, s)
            except RankDropError as exc:
                rec.successful = False
                rec.wall_ms = 1e3 * (time.perf_counter() - t0)
                trace.append(rec)
                k += 1
                status, message = Status.STEP_FAILURE, str(exc)
                break
            F = p.residual(x)
            f = 0.5 * float(F @ F)
            gnorm = m.norm(x, p.gradient(x, F))
            rec.wall_ms = 1e3 * (time.perf_counter() - t0)
            trace.append(rec)
            k += 1
    except EvaluationError as exc:
        status, message = Status.STEP_FAILURE, str(exc)
        f = gnorm = math.nan
    succ = sum(r.successful for r in trace)
    return RunSummary(status, k, succ, f, gnorm, 1e3 * (time.perf_counter() - t0), "rgn", trace, x, [], message)


def rsd_run(p: ResidualProblem, x0, cfg: SdConfig | None = None) -> RunSummary:
    """Steepest descent with Armijo backtracking along ``t -> R_x(-t grad f)``."""
    cfg = cfg or SdConfig()
    m = p.manifold
    t0 = time.perf_counter()
    trace: list[IterRecord] = []
    x = x0
    k = 0
    message = ""
    try:
        F = p.residual(x)
        f = 0.5 * float(F @ F)
        g = p.gradient(x, F)
        gnorm = m.norm(x, g)
        while True:
            status = _stop(f, gnorm, k, time.perf_counter() - t0, cfg)
            if status is not None:
                break
            d = -g
            slope = -gnorm**2  # <grad f, d>
            if cfg.initial_step == "cauchy":
                # minimizer of the linearized model along -grad
                Jg = p.apply_jacobian(x, g)
                t = gnorm**2 / float(Jg @ Jg) if Jg.any() else 1.0
            else:
                t = float(cfg.initial_step)
            accepted = False
            for nback in range(cfg.max_backtracks + 1):
                try:
                    x_new = m.retract(x, d * t)
                    F_new = p.residual(x_new)
                    f_new = 0.5 * float(F_new @ F_new)
                    if f_new <= f + cfg.armijo_c * t * slope:
                        accepted = True
                        break
                except RankDropError:
                    pass
                t *= cfg.backtrack_factor
            rec = IterRecord(k, f, gnorm, 0.0, 0.0, math.nan, t * gnorm, accepted, nback, 0.0)
            if not accepted:
                rec.wall_ms = 1e3 * (time.perf_counter() - t0)
                trace.append(rec)
                k += 1
                status, message = Status.STEP_FAILURE, f"no Armijo step after {cfg.max_backtracks} backtracks"
                break
            x, F, f = x_new, F_new, f_new
            g = p.gradient(x, F)
            gnorm = m.norm(x, g)
            rec.wall_ms = 1e3 * (time.perf_counter() - t0)
            trace.append(rec)
            k += 1
    except EvaluationError as exc:
        status, message = Status.STEP_FAILURE, str(exc)
        f = gnorm = math.nan
    succ = sum(r.successful for r in trace)
    return RunSummary(status, k, succ, f, gnorm, 1e3 * (time.perf_counter() - t0), "rsd", trace, x, [], message)
