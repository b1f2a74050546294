"""Residual problems ``min_x 1/2 ||F(x)||^2`` on a manifold.

A problem supplies ``F``, the Jacobian action ``J(x)[v]`` and the adjoint
``J(x)^*[u]`` as matrix-free operators; the gradient is ``J(x)^* F(x)``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, EvaluationError
from .manifolds import Euclidean, Manifold, TangentBasis, TangentVec

FD_STEP = 1e-6
POWER_ITERS = 20


def _finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(np.ravel(arr)))[0])
        raise EvaluationError(what, bad)
    return arr


class ResidualProblem(ABC):
    """Nonlinear least-squares problem on ``manifold`` with ``residual_dim`` residuals.

    Subclasses implement :meth:`_residual`, :meth:`_jacobian` and
    :meth:`_adjoint`; the public wrappers add finiteness checks.
    """

    name = "problem"

    def __init__(self, manifold: Manifold, residual_dim: int):
        self.manifold = manifold
        self.residual_dim = int(residual_dim)

    @abstractmethod
    def _residual(self, x) -> np.ndarray:
        ...

    @abstractmethod
    def _jacobian(self, x, v: TangentVec) -> np.ndarray:
        ...

    @abstractmethod
    def _adjoint(self, x, u: np.ndarray) -> TangentVec:
        ...

    def residual(self, x) -> np.ndarray:
        return _finite(np.asarray(self._residual(x), dtype=float), "residual")

    def apply_jacobian(self, x, v: TangentVec) -> np.ndarray:
        self.manifold.check_same_base(x, v.base)
        return _finite(np.asarray(self._jacobian(x, v), dtype=float), "jacobian")

    def apply_adjoint(self, x, u: np.ndarray) -> TangentVec:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.residual_dim,):
            raise ContractViolation(f"adjoint input must have length {self.residual_dim}")
        out = self._adjoint(x, u)
        _finite(out.data, "adjoint")
        return out

    def cost(self, x) -> float:
        F = self.residual(x)
        return 0.5 * float(F @ F)

    def gradient(self, x, F: np.ndarray | None = None) -> TangentVec:
        if F is None:
            F = self.residual(x)
        return self.apply_adjoint(x, F)

    def normal_operator(self, x, v: TangentVec) -> TangentVec:
        """``J(x)^* J(x) v``."""
        return self.apply_adjoint(x, self.apply_jacobian(x, v))

    def framed_jacobian(self, x, basis: TangentBasis | None = None) -> tuple[np.ndarray, TangentBasis]:
        """Dense ``m x n`` matrix of ``J(x)`` in an orthonormal tangent frame."""
        if basis is None:
            basis = self.manifold.tangent_basis(x)
        cols = [self.apply_jacobian(x, b) for b in basis.vectors]
        return np.column_stack(cols), basis

    def jacobian_norm(self, x, start: TangentVec | None = None, iters: int = POWER_ITERS, rng=None) -> float:
        """Estimate of ``||J(x)||`` by power iteration on ``J^* J``.

        The returned value is the largest Rayleigh quotient seen, so it is
        never below ``||J start|| / ||start||``.
        """
        m = self.manifold
        if start is None or m.norm(x, start) == 0.0:
            rng = np.random.default_rng(0) if rng is None else rng
            start = m.random_tangent(x, rng)
        v = start / m.norm(x, start)
        best = 0.0
        for _ in range(iters):
            Jv = self.apply_jacobian(x, v)
            best = max(best, float(Jv @ Jv))
            w = self.apply_adjoint(x, Jv)
            nw = m.norm(x, w)
            if nw == 0.0:
                break
            v = w / nw
        return float(np.sqrt(best))


class FunctionProblem(ResidualProblem):
    """Problem assembled from three callables (handy for small examples)."""

    def __init__(self, manifold, residual_dim, residual, jacobian, adjoint, name="function"):
        super().__init__(manifold, residual_dim)
        self._F, self._J, self._Jt = residual, jacobian, adjoint
        self.name = name

    def _residual(self, x):
        return self._F(x)

    def _jacobian(self, x, v):
        return self._J(x, v)

    def _adjoint(self, x, u):
        return self._Jt(x, u)


class AffineProblem(ResidualProblem):
    """``F(x) = A x - b`` on a Euclidean space or a sphere (vector points).

    On the sphere the adjoint is the tangent projection of ``A^T u``.
    """

    name = "affine"

    def __init__(self, manifold: Manifold, A: np.ndarray, b: np.ndarray):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.size or A.shape[1] != manifold.tangent_size:
            raise ContractViolation(f"A has shape {A.shape}, incompatible with {manifold!r} and b")
        super().__init__(manifold, A.shape[0])
        self.A, self.b = A, b

    def _residual(self, x):
        return self.A @ np.asarray(x).reshape(-1) - self.b

    def _jacobian(self, x, v):
        return self.A @ v.data

    def _adjoint(self, x, u):
        w = self.A.T @ u
        if isinstance(self.manifold, Euclidean):
            return TangentVec(self.manifold, x, w)
        return self.manifold.project_tangent(x, w)


@dataclass
class FdReport:
    """Worst-case errors over the sampled directions."""

    max_grad_rel_err: float
    max_adjoint_defect: float
    trials: int


def fd_check(p: ResidualProblem, x, trials: int = 10, seed: int = 0, h: float = FD_STEP) -> FdReport:
    """Compare ``<grad f, v>`` with central differences of ``f(R_x(t v))`` and
    measure the adjoint defect ``|<J^* u, v> - <u, J v>| / (1 + |u||v|)``.

    Directions ``v`` are random unit tangents; ``u`` are Gaussian.
    """
    rng = np.random.default_rng(seed)
    m = p.manifold
    F = p.residual(x)
    g = p.gradient(x, F)
    gnorm = m.norm(x, g)
    worst_fd = 0.0
    worst_adj = 0.0
    for _ in range(trials):
        v = m.random_tangent(x, rng)
        exact = m.inner(x, g, v)
        fp = p.cost(m.retract(x, v * h))
        fm = p.cost(m.retract(x, v * (-h)))
        fd = (fp - fm) / (2 * h)
        scale = max(gnorm, abs(exact), abs(fd), 1e-300)
        worst_fd = max(worst_fd, abs(exact - fd) / scale)

        u = rng.standard_normal(p.residual_dim)
        lhs = m.inner(x, p.apply_adjoint(x, u), v)
        rhs = float(u @ p.apply_jacobian(x, v))
        worst_adj = max(worst_adj, abs(lhs - rhs) / (1.0 + np.linalg.norm(u) * m.norm(x, v)))
    return FdReport(float(worst_fd), float(worst_adj), trials)
