"""Manifolds: the shared interface and the concrete spaces used by the benchmarks."""

from .base import (
    MEMBERSHIP_TOL,
    Manifold,
    RetractionDiagnostics,
    TangentBasis,
    TangentVec,
    check_retraction,
    loglog_slope,
)
from .euclidean import Euclidean
from .fixed_rank import FixedRank, FixedRankPoint, fixedrank_retract
from .product import Product
from .sphere import Sphere, sphere_exp_retract

__all__ = [
    "MEMBERSHIP_TOL",
    "Euclidean",
    "FixedRank",
    "FixedRankPoint",
    "Manifold",
    "Product",
    "RetractionDiagnostics",
    "Sphere",
    "TangentBasis",
    "TangentVec",
    "check_retraction",
    "fixedrank_retract",
    "loglog_slope",
    "sphere_exp_retract",
]
