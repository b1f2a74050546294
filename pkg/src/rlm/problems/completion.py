"""Low-rank matrix completion on the fixed-rank manifold.

The residual lists ``X_ij - a_ij`` over the observed set in row-major order;
``J[xi]`` samples the ambient tangent matrix on the same entries and
``J^*[u]`` projects the sparse matrix carrying ``u`` onto the tangent space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, InfeasibleError
from ..lsq import ResidualProblem
from ..manifolds import FixedRank, FixedRankPoint, TangentVec


@dataclass(frozen=True, eq=False)
class CompletionInstance:
    m: int
    n: int
    k: int
    rs: float
    seed: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    left: np.ndarray  # A_L, m x k
    right: np.ndarray  # A_R, n x k

    @property
    def omega(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    @property
    def ground_truth(self) -> np.ndarray:
        return self.left @ self.right.T

    def descriptor(self) -> dict:
        return {"kind": "completion", "m": self.m, "n": self.n, "k": self.k, "rs": self.rs, "seed": self.seed}


class CompletionProblem(ResidualProblem):
    name = "completion"

    def __init__(self, instance: CompletionInstance):
        super().__init__(FixedRank(instance.m, instance.n, instance.k), len(instance.rows))
        self.instance = instance
        self._rows, self._cols = instance.rows, instance.cols

    def _residual(self, x: FixedRankPoint):
        US = x.U @ x.S
        return np.einsum("ij,ij->i", US[self._rows], x.V[self._cols]) - self.instance.values

    def _jacobian(self, x: FixedRankPoint, v: TangentVec):
        M, Up, Vp = self.manifold.unpack(v)
        left = x.U @ M + Up
        r, c = self._rows, self._cols
        return np.einsum("ij,ij->i", left[r], x.V[c]) + np.einsum("ij,ij->i", x.U[r], Vp[c])

    def _adjoint(self, x: FixedRankPoint, u: np.ndarray):
        return self.manifold.project_entries(x, self._rows, self._cols, u)

    def truth_point(self) -> FixedRankPoint:
        return self.manifold.from_factors(self.instance.left, self.instance.right)


def omega_size(m: int, n: int, k: int, rs: float) -> int:
    """``round(rs * k (m + n - k))``."""
    return int(round(rs * k * (m + n - k)))


def gen_completion(m: int, n: int, k: int, rs: float, seed: int) -> tuple[CompletionInstance, CompletionProblem]:
    if not (1 <= k <= min(m, n)):
        raise ContractViolation(f"need 1 <= k <= min(m, n), got k={k}")
    size = omega_size(m, n, k, rs)
    if size > m * n:
        raise InfeasibleError(f"|Omega| = {size} exceeds m*n = {m * n}")
    if size < 1:
        raise InfeasibleError("empty sampling set")
    ss = np.random.SeedSequence(seed)
    omega_ss, factor_ss = ss.spawn(2)
    flat = np.sort(np.random.default_rng(omega_ss).choice(m * n, size=size, replace=False))
    rows, cols = np.divmod(flat, n)
    frng = np.random.default_rng(factor_ss)
    left = frng.standard_normal((m, k))
    right = frng.standard_normal((n, k))
    values = np.einsum("ij,ij->i", left[rows], right[cols])
    inst = CompletionInstance(m, n, k, float(rs), int(seed), rows, cols, values, left, right)
    return inst, CompletionProblem(inst)


def random_completion_point(problem: CompletionProblem, seed: int) -> FixedRankPoint:
    """Rank-k point ``B_L B_R^T`` with fresh Gaussian factors (stream disjoint from the instance's)."""
    inst = problem.instance
    rng = np.random.default_rng(np.random.SeedSequence([inst.seed, 1, seed]))
    return problem.manifold.from_factors(rng.standard_normal((inst.m, inst.k)), rng.standard_normal((inst.n, inst.k)))


def completion_start(
    problem: CompletionProblem,
    seed: int = 0,
    refine_tol: float = 1e-3,
    max_iter: int = 20000,
    time_budget: float = math.inf,
):
    """Warm start: random rank-k point refined by steepest descent until
    ``||grad f|| <= refine_tol``. Returns ``(point, rsd_summary)``."""
    from ..baselines import SdConfig, rsd_run

    x0 = random_completion_point(problem, seed)
    summary = rsd_run(problem, x0, SdConfig(grad_tol=refine_tol, max_iter=max_iter, time_budget=time_budget, initial_step="cauchy"))
    return summary.x, summary
