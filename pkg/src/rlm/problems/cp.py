"""Rank-r CP decomposition of a third-order tensor, parameterized by the three
factor matrices on a product of Euclidean spaces.

Because ``(a, b, c) -> (t a, b / t, c)`` leaves every rank-one term unchanged,
the Jacobian always has at least ``2 r`` null directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, InfeasibleError
from ..lsq import ResidualProblem
from ..manifolds import Euclidean, Product, TangentVec

MAX_TENSOR_ENTRIES = 10**6


def cp_tensor(factors) -> np.ndarray:
    """``sum_i a_i (x) b_i (x) c_i`` for factor matrices with r columns."""
    A, B, C = factors
    return np.einsum("ir,jr,kr->ijk", A, B, C)


@dataclass(frozen=True, eq=False)
class CpInstance:
    dims: tuple[int, int, int]
    rank: int
    p: float
    seed: int
    tensor: np.ndarray  # B, the input
    truth: tuple[np.ndarray, np.ndarray, np.ndarray]  # factors of A / ||A||_F

    def descriptor(self) -> dict:
        return {"kind": "cp", "dims": list(self.dims), "rank": self.rank, "p": self.p, "seed": self.seed}


class CpProblem(ResidualProblem):
    name = "cp"

    def __init__(self, instance: CpInstance):
        r = instance.rank
        manifold = Product([Euclidean(d, r) for d in instance.dims])
        super().__init__(manifold, math.prod(instance.dims))
        self.instance = instance

    def _residual(self, x):
        return (cp_tensor(x) - self.instance.tensor).ravel()

    def _jacobian(self, x, v: TangentVec):
        A, B, C = x
        dA, dB, dC = self.manifold.unpack(v)
        T = np.einsum("ir,jr,kr->ijk", dA, B, C)
        T += np.einsum("ir,jr,kr->ijk", A, dB, C)
        T += np.einsum("ir,jr,kr->ijk", A, B, dC)
        return T.ravel()

    def _adjoint(self, x, u):
        A, B, C = x
        T = u.reshape(self.instance.dims)
        gA = np.einsum("ijk,jr,kr->ir", T, B, C)
        gB = np.einsum("ijk,ir,kr->jr", T, A, C)
        gC = np.einsum("ijk,ir,jr->kr", T, A, B)
        return TangentVec(self.manifold, x, np.concatenate([gA.ravel(), gB.ravel(), gC.ravel()]))


def gen_cp(dims, r: int, p: float, seed: int) -> tuple[CpInstance, CpProblem]:
    """Input ``B = A / ||A|| + 10^-p E / ||E||`` with ``A`` the CP tensor of
    i.i.d. standard normal factors and ``E`` i.i.d. standard normal noise.
    ``p = inf`` gives a noise-free tensor."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ContractViolation("only third-order tensors are supported")
    if r < 1 or p < 0:
        raise ContractViolation("need r >= 1 and p >= 0")
    if math.prod(dims) > MAX_TENSOR_ENTRIES:
        raise InfeasibleError(f"tensor with {math.prod(dims)} entries exceeds {MAX_TENSOR_ENTRIES}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    factors = tuple(rng.standard_normal((d, r)) for d in dims)
    A = cp_tensor(factors)
    nA = np.linalg.norm(A)
    scale = nA ** (-1.0 / 3.0)
    truth = tuple(f * scale for f in factors)
    B = A / nA
    if math.isfinite(p):
        E = rng.standard_normal(dims)
        B = B + 10.0 ** (-p) * E / np.linalg.norm(E)
    inst = CpInstance(dims, int(r), float(p), int(seed), B, truth)
    return inst, CpProblem(inst)


def cp_start(problem: CpProblem, seed: int):
    """Random Gaussian factors rescaled so the CP tensor has unit norm."""
    inst = problem.instance
    rng = np.random.default_rng(np.random.SeedSequence([inst.seed, 1, seed]))
    factors = tuple(rng.standard_normal((d, inst.rank)) for d in inst.dims)
    scale = np.linalg.norm(cp_tensor(factors)) ** (-1.0 / 3.0)
    return tuple(f * scale for f in factors)
