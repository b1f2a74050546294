"""Affine least squares ``F_i(x) = <a_i, x> - b_i`` restricted to the unit sphere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from ..lsq import AffineProblem
from ..manifolds import Sphere


@dataclass(frozen=True, eq=False)
class SphereLsInstance:
    d: int
    m: int
    A: np.ndarray
    b: np.ndarray
    x_star: np.ndarray
    zero_residual: bool
    p: float
    seed: int

    def descriptor(self) -> dict:
        return {"kind": "sphere", "d": self.d, "m": self.m, "zero_residual": self.zero_residual, "p": self.p, "seed": self.seed}


def sphere_ls_problem(A, b) -> AffineProblem:
    A = np.asarray(A, dtype=float)
    return AffineProblem(Sphere(A.shape[1]), A, b)


def gen_sphere_ls(d: int, m: int, zero_residual: bool = True, seed: int = 0, p: float = 3.0):
    """Gaussian ``A`` (m x d) and a planted unit ``x*``; ``b = A x*`` plus,
    unless ``zero_residual``, a Gaussian offset of norm ``10^-p``."""
    if m < d:
        raise ContractViolation("need m >= d")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    A = rng.standard_normal((m, d))
    x_star = rng.standard_normal(d)
    x_star /= np.linalg.norm(x_star)
    b = A @ x_star
    if not zero_residual:
        e = rng.standard_normal(m)
        b = b + 10.0 ** (-p) * e / np.linalg.norm(e)
    inst = SphereLsInstance(d, m, A, b, x_star, bool(zero_residual), float(p), int(seed))
    return inst, sphere_ls_problem(A, b)
