"""Manifold interface, tangent vectors and retraction diagnostics.

Every tangent vector is stored as a flat float array ``data`` together with
the point it is attached to. Manifolds interpret the flat array through
:meth:`Manifold.unpack`, which returns manifold-specific views (for example
``(M, U_p, V_p)`` on the fixed-rank manifold). All shipped manifolds use a
metric that coincides with the Euclidean inner product of the flat arrays,
which keeps the linear algebra in the solvers cheap.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from ..errors import ContractViolation

MEMBERSHIP_TOL = 1e-10
BASIS_SKIP_TOL = 1e-8


def tree_map(fn, *trees):
    """Apply ``fn`` leafwise over nested tuples of arrays."""
    first = trees[0]
    if isinstance(first, tuple):
        return tuple(tree_map(fn, *parts) for parts in zip(*trees))
    return fn(*trees)


def tree_flatten(tree) -> np.ndarray:
    """Concatenate the leaves of a nested tuple of arrays into one vector."""
    if isinstance(tree, tuple):
        return np.concatenate([tree_flatten(t) for t in tree])
    if hasattr(tree, "toarray"):
        tree = tree.toarray()
    return np.asarray(tree, dtype=float).ravel()


class TangentVec:
    """Element of the tangent space at ``base``.

    Supports ``+``, ``-``, unary minus and scalar multiplication; binary
    operations require both operands to share the same base point.
    """

    __slots__ = ("manifold", "base", "data")

    def __init__(self, manifold: "Manifold", base: Any, data: np.ndarray):
        self.manifold = manifold
        self.base = base
        self.data = data

    @property
    def coords(self):
        return self.manifold.unpack(self)

    def _other(self, other: "TangentVec") -> np.ndarray:
        if not isinstance(other, TangentVec):
            return NotImplemented
        self.manifold.check_same_base(self.base, other.base)
        return other.data

    def __add__(self, other):
        d = self._other(other)
        if d is NotImplemented:
            return d
        return TangentVec(self.manifold, self.base, self.data + d)

    def __sub__(self, other):
        d = self._other(other)
        if d is NotImplemented:
            return d
        return TangentVec(self.manifold, self.base, self.data - d)

    def __neg__(self):
        return TangentVec(self.manifold, self.base, -self.data)

    def __mul__(self, a):
        if isinstance(a, TangentVec):
            return NotImplemented
        return TangentVec(self.manifold, self.base, self.data * float(a))

    __rmul__ = __mul__

    def __truediv__(self, a):
        return TangentVec(self.manifold, self.base, self.data / float(a))

    def __repr__(self):
        return f"TangentVec({self.manifold!r}, data={self.data!r})"


@dataclass(frozen=True)
class TangentBasis:
    """Ordered orthonormal basis of a tangent space."""

    base: Any
    vectors: tuple[TangentVec, ...]

    def __len__(self):
        return len(self.vectors)

    @property
    def matrix(self) -> np.ndarray:
        """Basis vectors stacked as rows of an ``n x L`` array of flat data."""
        return np.stack([v.data for v in self.vectors])

    def combine(self, coeffs: np.ndarray) -> TangentVec:
        """Tangent vector with the given coordinates in this frame."""
        v0 = self.vectors[0]
        return TangentVec(v0.manifold, self.base, np.asarray(coeffs) @ self.matrix)

    def coordinates(self, v: TangentVec) -> np.ndarray:
        v0 = self.vectors[0]
        v0.manifold.check_same_base(self.base, v.base)
        return self.matrix @ v.data

    def rotated(self, q: np.ndarray) -> "TangentBasis":
        """Basis whose i-th vector is ``sum_j q[i, j] * b_j``; orthonormal for orthogonal ``q``."""
        mat = q @ self.matrix
        m = self.vectors[0].manifold
        return TangentBasis(self.base, tuple(TangentVec(m, self.base, row.copy()) for row in mat))


class Manifold(ABC):
    """Riemannian manifold with a retraction.

    Subclasses define the point representation, the flat tangent layout and
    the embedding used by :meth:`project_tangent`.
    """

    @property
    @abstractmethod
    def dim(self) -> int:
        """Intrinsic dimension."""

    @property
    @abstractmethod
    def tangent_size(self) -> int:
        """Length of the flat tangent data array (>= dim)."""

    @property
    def descriptor(self) -> str:
        return repr(self)

    # -- representation -------------------------------------------------
    @abstractmethod
    def unpack(self, v: TangentVec):
        """Manifold-specific views of the flat tangent data."""

    @abstractmethod
    def pack(self, x, coords) -> TangentVec:
        """Build a tangent vector at ``x`` from manifold-specific coordinates (no projection)."""

    @abstractmethod
    def point_arrays(self, x) -> tuple[np.ndarray, ...]:
        """Arrays that make up the representation of ``x``."""

    # -- geometry -------------------------------------------------------
    @abstractmethod
    def retract(self, x, v: TangentVec):
        ...

    @abstractmethod
    def project_tangent(self, x, w) -> TangentVec:
        """Orthogonal projection of an ambient vector onto the tangent space at ``x``."""

    @abstractmethod
    def to_ambient(self, x):
        """Ambient representation of a point."""

    @abstractmethod
    def tangent_to_ambient(self, x, v: TangentVec):
        """Ambient representation of a tangent vector."""

    @abstractmethod
    def ambient_candidates(self, x) -> Iterator[Any]:
        """Deterministic spanning set of the ambient space, used to build bases."""

    @abstractmethod
    def random_point(self, rng: np.random.Generator):
        ...

    @abstractmethod
    def point_residual(self, x) -> float:
        """Size of the defining-equation residual of ``x`` (0 on the manifold)."""

    @abstractmethod
    def tangent_residual(self, v: TangentVec) -> float:
        """Size of the tangency-equation residual of ``v`` at its base."""

    # -- generic operations --------------------------------------------
    def is_point(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        try:
            return self.point_residual(x) <= tol
        except (ValueError, AttributeError, TypeError):
            return False

    def is_tangent(self, v: TangentVec, tol: float = MEMBERSHIP_TOL) -> bool:
        return v.data.shape == (self.tangent_size,) and self.tangent_residual(v) <= tol

    def same_point(self, x, y) -> bool:
        if x is y:
            return True
        a, b = self.point_arrays(x), self.point_arrays(y)
        return len(a) == len(b) and all(np.array_equal(p, q) for p, q in zip(a, b))

    def check_same_base(self, x, y) -> None:
        if not self.same_point(x, y):
            raise ContractViolation("tangent vectors live at different base points")

    def zero(self, x) -> TangentVec:
        return TangentVec(self, x, np.zeros(self.tangent_size))

    def inner(self, x, u: TangentVec, v: TangentVec) -> float:
        self.check_same_base(x, u.base)
        self.check_same_base(x, v.base)
        return float(np.dot(u.data, v.data))

    def norm(self, x, v: TangentVec) -> float:
        return float(np.sqrt(max(self.inner(x, v, v), 0.0)))

    def random_tangent(self, x, rng: np.random.Generator, unit: bool = True) -> TangentVec:
        amb = tree_map(lambda a: rng.standard_normal(np.shape(a)), self.to_ambient(x))
        v = self.project_tangent(x, amb)
        if unit:
            v = v / self.norm(x, v)
        return v

    def tangent_basis(self, x) -> TangentBasis:
        """Orthonormal basis via Gram-Schmidt (with re-orthogonalization)
        over projected ambient candidates, in a fixed order."""
        n = self.dim
        K = np.empty((n, self.tangent_size))
        count = 0
        for w in self.ambient_candidates(x):
            c = self.project_tangent(x, w).data
            for _ in range(2):
                c = c - K[:count].T @ (K[:count] @ c)
            nc = np.linalg.norm(c)
            if nc < BASIS_SKIP_TOL:
                continue
            K[count] = c / nc
            count += 1
            if count == n:
                break
        if count != n:
            raise ContractViolation(f"could only build {count} of {n} basis vectors")
        return TangentBasis(x, tuple(TangentVec(self, x, b) for b in K))


@dataclass
class RetractionDiagnostics:
    """Finite-difference checks of the retraction curve ``t -> R_x(t v)``."""

    ts: list[float]
    first_order: list[float]
    acceleration: list[float]
    acceleration_tangent: list[float]
    defects: list[float] = field(default_factory=list)

    @property
    def first_order_slope(self) -> float:
        """log-log slope of ``first_order`` against ``t`` (about 1 for any retraction)."""
        return loglog_slope(self.ts, self.first_order)

    @property
    def defect_slope(self) -> float:
        """log-log slope of the raw defect against ``t`` (about 2)."""
        return loglog_slope(self.ts, self.defects)

    @property
    def acceleration_estimate(self) -> float:
        """Smallest tangent-projected second difference over the sampled ``t``."""
        return min(self.acceleration_tangent)


def loglog_slope(ts: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ts)``; nan if any value is 0."""
    vals = np.asarray(values, dtype=float)
    if np.any(vals <= 0):
        return float("nan")
    return float(np.polyfit(np.log(ts), np.log(vals), 1)[0])


def check_retraction(m: Manifold, x, v: TangentVec, ts: Sequence[float] = (1e-2, 1e-3, 1e-4)) -> RetractionDiagnostics:
    """Estimate ``||R_x(tv) - x - tv|| / t`` and the second difference
    ``(R_x(tv) - 2x + R_x(-tv)) / t^2`` (raw and tangent-projected)."""
    xa = m.to_ambient(x)
    xf = tree_flatten(xa)
    vf = tree_flatten(m.tangent_to_ambient(x, v))
    first, acc, acc_t, defects = [], [], [], []
    for t in ts:
        plus = m.to_ambient(m.retract(x, v * t))
        minus = m.to_ambient(m.retract(x, v * (-t)))
        d = float(np.linalg.norm(tree_flatten(plus) - xf - t * vf))
        defects.append(d)
        first.append(d / t)
        second = tree_map(lambda p, q, c: (np.asarray(p) + np.asarray(q) - 2 * np.asarray(c)) / t**2, plus, minus, xa)
        acc.append(float(np.linalg.norm(tree_flatten(second))))
        acc_t.append(m.norm(x, m.project_tangent(x, second)))
    return RetractionDiagnostics(list(ts), first, acc, acc_t, defects)
