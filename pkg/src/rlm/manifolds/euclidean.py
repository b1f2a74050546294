from __future__ import annotations

import math

import numpy as np

from ..errors import ContractViolation
from .base import Manifold, TangentBasis, TangentVec


class Euclidean(Manifold):
    """R^n (or a space of arrays of a fixed shape) with the canonical metric.

    ``Euclidean(3)`` holds vectors, ``Euclidean(13, 5)`` holds 13x5 matrices.
    """

    def __init__(self, *shape: int):
        if not shape or any(int(s) < 1 for s in shape):
            raise ContractViolation(f"invalid Euclidean shape {shape}")
        self.shape = tuple(int(s) for s in shape)
        self._n = math.prod(self.shape)

    def __repr__(self):
        return f"Euclidean{self.shape}"

    @property
    def dim(self) -> int:
        return self._n

    @property
    def tangent_size(self) -> int:
        return self._n

    def unpack(self, v):
        return v.data.reshape(self.shape)

    def pack(self, x, coords) -> TangentVec:
        arr = np.asarray(coords, dtype=float)
        if arr.size != self._n:
            raise ContractViolation(f"expected {self.shape}, got shape {arr.shape}")
        return TangentVec(self, x, arr.reshape(-1).copy())

    def point_arrays(self, x):
        return (np.asarray(x),)

    def retract(self, x, v):
        self.check_same_base(x, v.base)
        return np.asarray(x) + v.data.reshape(self.shape)

    def project_tangent(self, x, w):
        return self.pack(x, w)

    def to_ambient(self, x):
        return np.asarray(x, dtype=float)

    def tangent_to_ambient(self, x, v):
        return v.data.reshape(self.shape).copy()

    def ambient_candidates(self, x):
        for i in range(self._n):
            e = np.zeros(self._n)
            e[i] = 1.0
            yield e.reshape(self.shape)

    def tangent_basis(self, x) -> TangentBasis:
        eye = np.eye(self._n)
        return TangentBasis(x, tuple(TangentVec(self, x, row) for row in eye))

    def random_point(self, rng):
        return rng.standard_normal(self.shape)

    def point_residual(self, x) -> float:
        x = np.asarray(x)
        if x.shape != self.shape and not (len(self.shape) == 1 and x.size == self._n):
            raise ValueError("shape mismatch")
        return 0.0 if np.all(np.isfinite(x)) else math.inf

    def tangent_residual(self, v) -> float:
        return 0.0
