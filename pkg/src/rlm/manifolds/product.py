from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ContractViolation
from .base import Manifold, TangentVec


class Product(Manifold):
    """Cartesian product of manifolds. Points and ambient vectors are tuples;
    the metric is the sum of the component metrics."""

    def __init__(self, components: Sequence[Manifold]):
        if not components:
            raise ContractViolation("product needs at least one component")
        self.components = tuple(components)
        sizes = [c.tangent_size for c in self.components]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    def __repr__(self):
        return "Product(" + ", ".join(repr(c) for c in self.components) + ")"

    @property
    def dim(self) -> int:
        return sum(c.dim for c in self.components)

    @property
    def tangent_size(self) -> int:
        return int(self._offsets[-1])

    def _check_count(self, seq):
        if len(seq) != len(self.components):
            raise ContractViolation(f"expected {len(self.components)} components, got {len(seq)}")

    def split(self, v: TangentVec) -> tuple[TangentVec, ...]:
        """Component tangent vectors (views into ``v.data``)."""
        o = self._offsets
        return tuple(
            TangentVec(c, xi, v.data[o[i]:o[i + 1]]) for i, (c, xi) in enumerate(zip(self.components, v.base))
        )

    def unpack(self, v):
        return tuple(c.unpack(vi) for c, vi in zip(self.components, self.split(v)))

    def pack(self, x, coords) -> TangentVec:
        self._check_count(coords)
        self._check_count(x)
        parts = [c.pack(xi, ci).data for c, xi, ci in zip(self.components, x, coords)]
        return TangentVec(self, x, np.concatenate(parts))

    def join(self, x, parts: Sequence[TangentVec]) -> TangentVec:
        self._check_count(parts)
        return TangentVec(self, x, np.concatenate([p.data for p in parts]))

    def point_arrays(self, x):
        self._check_count(x)
        return tuple(a for c, xi in zip(self.components, x) for a in c.point_arrays(xi))

    def inner(self, x, u, v) -> float:
        self.check_same_base(x, u.base)
        self.check_same_base(x, v.base)
        return float(sum(c.inner(xi, ui, vi) for c, xi, ui, vi in zip(self.components, x, self.split(u), self.split(v))))

    def retract(self, x, v):
        self.check_same_base(x, v.base)
        return tuple(c.retract(xi, vi) for c, xi, vi in zip(self.components, x, self.split(v)))

    def project_tangent(self, x, w):
        self._check_count(w)
        return self.join(x, [c.project_tangent(xi, wi) for c, xi, wi in zip(self.components, x, w)])

    def to_ambient(self, x):
        return tuple(c.to_ambient(xi) for c, xi in zip(self.components, x))

    def tangent_to_ambient(self, x, v):
        return tuple(c.tangent_to_ambient(xi, vi) for c, xi, vi in zip(self.components, x, self.split(v)))

    def ambient_candidates(self, x):
        zeros = [np.zeros_like(np.asarray(c.to_ambient(xi), dtype=float)) for c, xi in zip(self.components, x)]
        for i, (c, xi) in enumerate(zip(self.components, x)):
            for w in c.ambient_candidates(xi):
                yield tuple(w if j == i else zeros[j] for j in range(len(zeros)))

    def random_point(self, rng):
        return tuple(c.random_point(rng) for c in self.components)

    def point_residual(self, x) -> float:
        self._check_count(x)
        return max(c.point_residual(xi) for c, xi in zip(self.components, x))

    def tangent_residual(self, v) -> float:
        return max(c.tangent_residual(vi) for c, vi in zip(self.components, self.split(v)))
