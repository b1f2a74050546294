"""Manifold of m x n real matrices of rank exactly k.

Points are kept in factored form ``X = U S V^T`` with orthonormal ``U`` (m x k)
and ``V`` (n x k). A tangent vector at ``X`` is the triple ``(M, U_p, V_p)``
with ``U^T U_p = 0`` and ``V^T V_p = 0`` and represents the ambient matrix

    U M V^T + U_p V^T + U V_p^T.

With the Frobenius metric the three blocks are mutually orthogonal, so the
metric is the plain sum of squares of the stored entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, RankDropError
from .base import Manifold, TangentVec

RANK_DROP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FixedRankPoint:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def full(self) -> np.ndarray:
        return (self.U @ self.S) @ self.V.T


class FixedRank(Manifold):
    def __init__(self, m: int, n: int, k: int):
        if not (1 <= k <= min(m, n)):
            raise ContractViolation(f"need 1 <= k <= min(m, n), got m={m}, n={n}, k={k}")
        self.m, self.n, self.k = int(m), int(n), int(k)
        self._sizes = (k * k, m * k, n * k)

    def __repr__(self):
        return f"FixedRank({self.m}, {self.n}, {self.k})"

    @property
    def dim(self) -> int:
        return self.k * (self.m + self.n - self.k)

    @property
    def tangent_size(self) -> int:
        return sum(self._sizes)

    # -- representation -------------------------------------------------
    def unpack(self, v):
        k, m, n = self.k, self.m, self.n
        d = v.data
        a, b = k * k, k * k + m * k
        return d[:a].reshape(k, k), d[a:b].reshape(m, k), d[b:].reshape(n, k)

    def pack(self, x, coords) -> TangentVec:
        M, Up, Vp = (np.asarray(c, dtype=float) for c in coords)
        if M.shape != (self.k, self.k) or Up.shape != (self.m, self.k) or Vp.shape != (self.n, self.k):
            raise ContractViolation("tangent blocks have the wrong shapes")
        return TangentVec(self, x, np.concatenate([M.ravel(), Up.ravel(), Vp.ravel()]))

    def point_arrays(self, x):
        return (x.U, x.S, x.V)

    def from_matrix(self, X: np.ndarray) -> FixedRankPoint:
        """Rank-k truncated SVD of a dense matrix."""
        u, s, vt = np.linalg.svd(np.asarray(X, dtype=float), full_matrices=False)
        k = self.k
        if s[k - 1] <= RANK_DROP_TOL * s[0]:
            raise RankDropError(f"matrix has numerical rank < {k}")
        return FixedRankPoint(u[:, :k].copy(), np.diag(s[:k]), vt[:k].T.copy())

    def from_factors(self, left: np.ndarray, right: np.ndarray) -> FixedRankPoint:
        """Point representing ``left @ right.T`` without forming it."""
        ql, rl = np.linalg.qr(left)
        qr_, rr = np.linalg.qr(right)
        u, s, vt = np.linalg.svd(rl @ rr.T)
        k = self.k
        if s[k - 1] <= RANK_DROP_TOL * s[0]:
            raise RankDropError(f"factors have numerical rank < {k}")
        return FixedRankPoint(ql @ u[:, :k], np.diag(s[:k]), qr_ @ vt[:k].T)

    # -- geometry -------------------------------------------------------
    def project_tangent(self, x, w) -> TangentVec:
        """``P_U w P_V + P_U^perp w P_V + P_U w P_V^perp`` for a dense or sparse ``w``."""
        U, V = x.U, x.V
        wV = np.asarray(w @ V)
        wtU = np.asarray(w.T @ U)
        M = U.T @ wV
        Up = wV - U @ M
        Vp = wtU - V @ M.T
        return TangentVec(self, x, np.concatenate([M.ravel(), Up.ravel(), Vp.ravel()]))

    def project_entries(self, x, rows, cols, vals) -> TangentVec:
        """Tangent projection of the sparse matrix with ``vals`` at ``(rows, cols)``."""
        U, V = x.U, x.V
        wV = np.empty((self.m, self.k))
        wtU = np.empty((self.n, self.k))
        for a in range(self.k):
            wV[:, a] = np.bincount(rows, weights=vals * V[cols, a], minlength=self.m)
            wtU[:, a] = np.bincount(cols, weights=vals * U[rows, a], minlength=self.n)
        M = U.T @ wV
        Up = wV - U @ M
        Vp = wtU - V @ M.T
        return TangentVec(self, x, np.concatenate([M.ravel(), Up.ravel(), Vp.ravel()]))

    def retract(self, x, v) -> FixedRankPoint:
        """Metric projection: rank-k truncated SVD of ``X + ambient(v)``,
        computed from QR factors of ``[U U_p]`` and ``[V V_p]``."""
        self.check_same_base(x, v.base)
        if not v.data.any():
            return x
        M, Up, Vp = self.unpack(v)
        k = self.k
        qu, ru = np.linalg.qr(np.hstack([x.U, Up]))
        qv, rv = np.linalg.qr(np.hstack([x.V, Vp]))
        core = np.zeros((2 * k, 2 * k))
        core[:k, :k] = x.S + M
        core[:k, k:] = np.eye(k)
        core[k:, :k] = np.eye(k)
        uc, sc, vct = np.linalg.svd(ru @ core @ rv.T)
        if not sc[k - 1] > RANK_DROP_TOL * sc[0]:
            raise RankDropError(f"retraction lost rank: sigma_k = {sc[k - 1]:.3e}, sigma_1 = {sc[0]:.3e}")
        U = qu @ uc[:, :k]
        V = qv @ vct[:k].T
        # re-orthonormalize to stop drift over long runs
        U, ru2 = np.linalg.qr(U)
        V, rv2 = np.linalg.qr(V)
        S = ru2 @ np.diag(sc[:k]) @ rv2.T
        return FixedRankPoint(U, S, V)

    def to_ambient(self, x) -> np.ndarray:
        return x.full()

    def tangent_to_ambient(self, x, v) -> np.ndarray:
        M, Up, Vp = self.unpack(v)
        return (x.U @ M + Up) @ x.V.T + x.U @ Vp.T

    def ambient_candidates(self, x):
        for i in range(self.m):
            for j in range(self.n):
                e = np.zeros((self.m, self.n))
                e[i, j] = 1.0
                yield e

    def random_point(self, rng) -> FixedRankPoint:
        return self.from_factors(rng.standard_normal((self.m, self.k)), rng.standard_normal((self.n, self.k)))

    def point_residual(self, x) -> float:
        U, S, V = x.U, x.S, x.V
        if U.shape != (self.m, self.k) or V.shape != (self.n, self.k) or S.shape != (self.k, self.k):
            raise ValueError("factor shapes do not match the manifold")
        eye = np.eye(self.k)
        orth = max(np.abs(U.T @ U - eye).max(), np.abs(V.T @ V - eye).max())
        s = np.linalg.svd(S, compute_uv=False)
        if not s[-1] > RANK_DROP_TOL * s[0]:
            return np.inf
        return float(orth)

    def tangent_residual(self, v) -> float:
        _, Up, Vp = self.unpack(v)
        x = v.base
        return float(max(np.abs(x.U.T @ Up).max(), np.abs(x.V.T @ Vp).max()))


def fixedrank_retract(x: FixedRankPoint, v: TangentVec) -> FixedRankPoint:
    return v.manifold.retract(x, v)
