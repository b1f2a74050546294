"""Riemannian Levenberg-Marquardt with a ratio-test damping update.

Each iteration solves the damped normal equations

    (J^* J + lambda_k I) s = -grad f(x_k),   lambda_k = mu_k ||F(x_k)||^2,

on the tangent space, compares actual against predicted decrease and either
accepts ``R_x(s)`` (shrinking ``mu``) or keeps ``x`` and multiplies ``mu`` by
``beta``.
"""

from __future__ import annotations

import logging
import math
import sys
import time
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import ContractViolation, DegenerateModelDecrease, EvaluationError, InsufficientData, RankDropError
from .lsq import ResidualProblem
from .manifolds import TangentBasis, TangentVec
from .trace import IterRecord, RunSummary, Status

log = logging.getLogger(__name__)

DENSE_MAX_DIM = 64
DEGENERATE_DECREASE = 1e-300
AUDIT_SLACK = 1e-9
DENSE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class RlmConfig:
    eta: float = 0.2
    mu_min: float = 0.1
    beta: float = 5.0
    flag_nz: bool = False
    grad_tol: float = 1e-8
    f_tol: float = 0.0
    max_iter: int = 1000
    time_budget: float = math.inf
    subproblem: str = "auto"  # "auto" | "dense" | "cg"
    cg_tol_factor: float = 1e-2
    cg_max_iter: int | None = None  # default 10 * intrinsic dim
    mu_max: float = 1e30
    audit: bool = False

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ContractViolation("eta must lie in (0, 1)")
        if not self.mu_min > 0.0:
            raise ContractViolation("mu_min must be positive")
        if not self.beta > 1.0:
            raise ContractViolation("beta must exceed 1")
        if self.subproblem not in ("auto", "dense", "cg"):
            raise ContractViolation(f"unknown subproblem solver {self.subproblem!r}")
        if self.grad_tol < 0 or self.f_tol < 0 or self.max_iter < 0:
            raise ContractViolation("tolerances and max_iter must be non-negative")

    def with_(self, **kw) -> "RlmConfig":
        return replace(self, **kw)


# Stopping rules of the two experiment families.
PRESETS = {
    "default": RlmConfig(),
    # no iteration cap: time budget and gradient tolerance only
    "completion": RlmConfig(grad_tol=1e-8, time_budget=300.0, max_iter=sys.maxsize),
    "cp": RlmConfig(grad_tol=1e-6, f_tol=1e-10, max_iter=1000),
}


def theta(p: ResidualProblem, x, s: TangentVec, lam: float, F: np.ndarray | None = None) -> float:
    """Model value ``||F(x) + J(x) s||^2 + lam ||s||_x^2``."""
    if F is None:
        F = p.residual(x)
    r = F + p.apply_jacobian(x, s)
    return float(r @ r) + lam * p.manifold.inner(x, s, s)


class SubproblemSolution(NamedTuple):
    step: TangentVec
    iters: int
    method: str
    breakdown: bool = False


def _use_dense(p: ResidualProblem, cfg: RlmConfig) -> bool:
    if cfg.subproblem == "cg":
        return False
    small = p.manifold.dim <= DENSE_MAX_DIM
    if cfg.subproblem == "dense" and not small:
        raise ContractViolation(f"dense subproblem path needs intrinsic dim <= {DENSE_MAX_DIM}, got {p.manifold.dim}")
    return small


def solve_subproblem(
    p: ResidualProblem,
    x,
    lam: float,
    cfg: RlmConfig | None = None,
    *,
    F: np.ndarray | None = None,
    grad: TangentVec | None = None,
    basis: TangentBasis | None = None,
) -> SubproblemSolution:
    """Solve ``(J^* J + lam I) s = -grad f(x)`` on the tangent space at ``x``.

    Passing ``basis`` forces the dense path in that orthonormal frame.
    """
    if not lam > 0:
        raise ContractViolation("damping parameter must be positive")
    cfg = cfg or RlmConfig()
    if F is None:
        F = p.residual(x)
    if basis is not None and p.manifold.dim > DENSE_MAX_DIM:
        raise ContractViolation(f"frame path needs intrinsic dim <= {DENSE_MAX_DIM}, got {p.manifold.dim}")
    if basis is not None or _use_dense(p, cfg):
        return _solve_dense(p, x, lam, F, basis)
    if grad is None:
        grad = p.gradient(x, F)
    return _solve_cg(p, x, lam, grad, cfg)


def _solve_dense(p, x, lam, F, basis) -> SubproblemSolution:
    Jt, basis = p.framed_jacobian(x, basis)
    u, sig, vt = np.linalg.svd(Jt, full_matrices=False)
    coeffs = -(vt.T @ ((sig / (sig**2 + lam)) * (u.T @ F)))
    return SubproblemSolution(basis.combine(coeffs), 0, "dense")


def _solve_cg(p, x, lam, grad, cfg) -> SubproblemSolution:
    m = p.manifold
    gnorm = m.norm(x, grad)
    s = m.zero(x)
    if gnorm == 0.0:
        return SubproblemSolution(s, 0, "cg")
    tol = cfg.cg_tol_factor * min(1.0, gnorm) * gnorm
    max_it = cfg.cg_max_iter or 10 * m.dim
    r = -grad  # residual of A s = -grad at s = 0
    d = r
    rr = m.inner(x, r, r)
    it = 0
    breakdown = False
    while it < max_it and math.sqrt(rr) > tol:
        Ad = p.normal_operator(x, d) + d * lam
        dAd = m.inner(x, d, Ad)
        if not dAd > 0.0:
            breakdown = True
            log.warning("CG breakdown (d^T A d = %g) at iteration %d", dAd, it)
            break
        alpha = rr / dAd
        s = s + d * alpha
        r = r - Ad * alpha
        rr_new = m.inner(x, r, r)
        d = r + d * (rr_new / rr)
        rr = rr_new
        it += 1
    return SubproblemSolution(s, it, "cg", breakdown)


def normal_equation_residual(p: ResidualProblem, x, s: TangentVec, lam: float, grad: TangentVec) -> float:
    """``||(J^* J + lam I) s + grad f(x)||_x``."""
    return p.manifold.norm(x, p.normal_operator(x, s) + s * lam + grad)


@dataclass
class StepEvaluation:
    model_decrease: float  # theta(0) - theta(s)
    x_new: object
    f_new: float
    F_new: np.ndarray | None
    rho: float
    failure: str = ""


def _evaluate_step(p, x, s, lam, F, f, grad) -> StepEvaluation:
    m = p.manifold
    Js = p.apply_jacobian(x, s)
    # expanded form avoids cancellation in ||F||^2 - ||F + Js||^2
    pred = -2.0 * m.inner(x, grad, s) - float(Js @ Js) - lam * m.inner(x, s, s)
    if not pred > DEGENERATE_DECREASE:
        return StepEvaluation(pred, None, math.nan, None, math.nan, "degenerate model decrease")
    try:
        x_new = m.retract(x, s)
    except RankDropError as exc:
        return StepEvaluation(pred, None, math.nan, None, math.nan, str(exc))
    F_new = p.residual(x_new)
    f_new = 0.5 * float(F_new @ F_new)
    return StepEvaluation(pred, x_new, f_new, F_new, (f - f_new) / (0.5 * pred))


def rho(p: ResidualProblem, x, s: TangentVec, lam: float) -> float:
    """Ratio of actual to predicted decrease for the step ``s``."""
    F = p.residual(x)
    ev = _evaluate_step(p, x, s, lam, F, 0.5 * float(F @ F), p.gradient(x, F))
    if ev.failure == "degenerate model decrease":
        raise DegenerateModelDecrease(f"theta(0) - theta(s) = {ev.model_decrease!r}")
    if ev.failure:
        raise RankDropError(ev.failure)
    return ev.rho


def update_mu(mu: float, mu_bar: float, successful: bool, cfg: RlmConfig) -> tuple[float, float]:
    """Return ``(mu_next, mu_bar_next)``."""
    if successful:
        mu_bar = mu
        if cfg.flag_nz:
            return mu_bar, mu_bar
        return max(cfg.mu_min, mu_bar / cfg.beta), mu_bar
    return cfg.beta * mu, mu_bar


@dataclass
class AuditContext:
    grad_norm: float
    jac_norm: float
    lam: float
    step_norm: float
    model_decrease: float
    grad_dot_step: float
    normal_residual: float | None = None
    normal_tol: float | None = None


def audit_iteration(record: IterRecord | None, ctx: AuditContext) -> list[str]:
    """Check the Cauchy-decrease and step-bound inequalities for one iteration.

    Returns human-readable descriptions of every violated inequality.
    """
    out = []
    g2 = ctx.grad_norm**2
    cauchy = g2 / (ctx.jac_norm**2 + ctx.lam) if g2 > 0 else 0.0
    label = f"iter {record.k}: " if record is not None else ""

    def below(lhs, rhs):
        return lhs < rhs - AUDIT_SLACK * max(abs(lhs), abs(rhs))

    if below(ctx.model_decrease, cauchy):
        out.append(f"{label}model decrease {ctx.model_decrease:.6e} < {cauchy:.6e}")
    bound = ctx.grad_norm / ctx.lam if ctx.lam > 0 else math.inf
    if below(bound, ctx.step_norm):
        out.append(f"{label}step norm {ctx.step_norm:.6e} > |grad|/lambda = {bound:.6e}")
    if below(-ctx.grad_dot_step, cauchy):
        out.append(f"{label}-<grad, s> = {-ctx.grad_dot_step:.6e} < {cauchy:.6e}")
    if ctx.normal_residual is not None and ctx.normal_tol is not None:
        if ctx.normal_residual > ctx.normal_tol * (1 + AUDIT_SLACK):
            out.append(f"{label}normal-equation residual {ctx.normal_residual:.3e} > {ctx.normal_tol:.3e}")
    return out


def _stop_status(f, gnorm, k, elapsed, cfg) -> Status | None:
    if gnorm <= cfg.grad_tol:
        return Status.GRAD_TOL
    if cfg.f_tol > 0 and f <= cfg.f_tol:
        return Status.F_TOL
    if k >= cfg.max_iter:
        return Status.MAX_ITER
    if elapsed >= cfg.time_budget:
        return Status.TIME_BUDGET
    return None


def rlm_run(
    p: ResidualProblem,
    x0,
    cfg: RlmConfig | None = None,
    callback: Callable[[IterRecord, object], None] | None = None,
) -> RunSummary:
    """Run the solver from ``x0`` until the first stopping rule fires."""
    cfg = cfg or RlmConfig()
    m = p.manifold
    x = x0
    mu = cfg.mu_min
    mu_bar = mu
    trace: list[IterRecord] = []
    violations: list[str] = []
    t_start = time.perf_counter()
    k = 0
    succ = 0
    message = ""

    def elapsed():
        return time.perf_counter() - t_start

    try:
        F = p.residual(x)
        f = 0.5 * float(F @ F)
        g = p.gradient(x, F)
        gnorm = m.norm(x, g)
    except EvaluationError as exc:
        return RunSummary(Status.STEP_FAILURE, 0, 0, math.nan, math.nan, 0.0, "rlm", [], x, [], str(exc))

    while True:
        status = _stop_status(f, gnorm, k, elapsed(), cfg)
        if status is not None:
            break
        try:
            lam = mu * float(F @ F)
            sol = solve_subproblem(p, x, lam, cfg, F=F, grad=g)
            s = sol.step
            ev = _evaluate_step(p, x, s, lam, F, f, g)
        except EvaluationError as exc:
            status, message = Status.STEP_FAILURE, str(exc)
            break
        successful = ev.failure == "" and ev.rho >= cfg.eta
        step_norm = m.norm(x, s)
        rec = IterRecord(k, f, gnorm, lam, mu, ev.rho, step_norm, successful, sol.iters, 0.0)

        if cfg.audit:
            ctx = AuditContext(
                grad_norm=gnorm,
                jac_norm=p.jacobian_norm(x, start=g),
                lam=lam,
                step_norm=step_norm,
                model_decrease=ev.model_decrease,
                grad_dot_step=m.inner(x, g, s),
                normal_residual=normal_equation_residual(p, x, s, lam, g),
                normal_tol=_normal_tol(gnorm, m.dim, cfg, sol),
            )
            violations.extend(audit_iteration(rec, ctx))

        if successful:
            try:
                F_new = ev.F_new
                g_new = p.gradient(ev.x_new, F_new)
            except EvaluationError as exc:
                rec.wall_ms = 1e3 * elapsed()
                trace.append(rec)
                status, message = Status.STEP_FAILURE, str(exc)
                k += 1
                break
            x, F, f, g = ev.x_new, F_new, ev.f_new, g_new
            gnorm = m.norm(x, g)
            succ += 1
        mu, mu_bar = update_mu(mu, mu_bar, successful, cfg)
        rec.wall_ms = 1e3 * elapsed()
        trace.append(rec)
        if callback is not None:
            callback(rec, x)
        k += 1
        if mu > cfg.mu_max:
            status, message = Status.STEP_FAILURE, f"mu exceeded {cfg.mu_max:g}"
            break

    return RunSummary(status, k, succ, f, gnorm, 1e3 * elapsed(), "rlm", trace, x, violations, message)


def _normal_tol(gnorm, dim, cfg, sol) -> float | None:
    if sol.method == "dense":
        return DENSE_RESIDUAL_TOL * (1.0 + gnorm)
    if sol.breakdown or sol.iters >= (cfg.cg_max_iter or 10 * dim):
        return None
    return cfg.cg_tol_factor * min(1.0, gnorm) * gnorm


class OrderFit(NamedTuple):
    q: float
    c: float


def estimate_order(errors, window: int | None = None) -> OrderFit:
    """Fit ``log e_{k+1} = q log e_k + log c`` over the last ``window`` values.

    Non-positive and non-finite entries are dropped before windowing.
    """
    e = np.asarray([v for v in errors if np.isfinite(v) and v > 0], dtype=float)
    if window is not None:
        e = e[-window:]
    if e.size < 4:
        raise InsufficientData(f"need at least 4 positive values, got {e.size}")
    q, logc = np.polyfit(np.log(e[:-1]), np.log(e[1:]), 1)
    return OrderFit(float(q), float(np.exp(logc)))
