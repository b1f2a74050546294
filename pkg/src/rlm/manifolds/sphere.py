from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from .base import Manifold, TangentVec


class Sphere(Manifold):
    """Unit sphere in R^d (manifold dimension d - 1) with the embedded metric
    and the exponential map as retraction."""

    def __init__(self, ambient_dim: int):
        if ambient_dim < 2:
            raise ContractViolation("sphere needs ambient dimension >= 2")
        self.ambient_dim = int(ambient_dim)

    def __repr__(self):
        return f"Sphere({self.ambient_dim})"

    @property
    def dim(self) -> int:
        return self.ambient_dim - 1

    @property
    def tangent_size(self) -> int:
        return self.ambient_dim

    def unpack(self, v):
        return v.data

    def pack(self, x, coords) -> TangentVec:
        arr = np.asarray(coords, dtype=float).reshape(-1)
        if arr.shape != (self.ambient_dim,):
            raise ContractViolation("tangent coordinates have the wrong length")
        return TangentVec(self, x, arr.copy())

    def point_arrays(self, x):
        return (np.asarray(x),)

    def retract(self, x, v):
        return sphere_exp_retract(x, v)

    def project_tangent(self, x, w):
        w = np.asarray(w, dtype=float).reshape(-1)
        return TangentVec(self, x, w - np.dot(x, w) * x)

    def to_ambient(self, x):
        return np.asarray(x, dtype=float)

    def tangent_to_ambient(self, x, v):
        return v.data.copy()

    def ambient_candidates(self, x):
        yield from np.eye(self.ambient_dim)

    def random_point(self, rng):
        x = rng.standard_normal(self.ambient_dim)
        return x / np.linalg.norm(x)

    def point_residual(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ambient_dim,):
            raise ValueError("shape mismatch")
        return abs(float(np.linalg.norm(x)) - 1.0)

    def tangent_residual(self, v) -> float:
        return abs(float(np.dot(v.base, v.data)))


def sphere_exp_retract(x, v: TangentVec) -> np.ndarray:
    """Exponential map ``cos(|v|) x + sin(|v|) v / |v|``, renormalized."""
    v.manifold.check_same_base(x, v.base)
    nv = float(np.linalg.norm(v.data))
    if nv == 0.0:
        return x
    y = np.cos(nv) * x + np.sin(nv) * (v.data / nv)
    return y / np.linalg.norm(y)
