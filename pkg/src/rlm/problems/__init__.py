"""Benchmark problems with known ground truth."""

from __future__ import annotations

from functools import singledispatch

import numpy as np

from ..manifolds import Manifold
from .completion import (
    CompletionInstance,
    CompletionProblem,
    completion_start,
    gen_completion,
    omega_size,
    random_completion_point,
)
from .cp import CpInstance, CpProblem, cp_start, cp_tensor, gen_cp
from .sphere_ls import SphereLsInstance, gen_sphere_ls, sphere_ls_problem


@singledispatch
def error_to_truth(instance, x) -> float:
    raise TypeError(f"no ground truth for {type(instance).__name__}")


@error_to_truth.register
def _(instance: CompletionInstance, x) -> float:
    return float(np.linalg.norm(x.full() - instance.ground_truth))


@error_to_truth.register
def _(instance: CpInstance, x) -> float:
    return float(np.linalg.norm(cp_tensor(x) - cp_tensor(instance.truth)))


@error_to_truth.register
def _(instance: SphereLsInstance, x) -> float:
    return float(np.linalg.norm(np.asarray(x) - instance.x_star))


def perturb(manifold: Manifold, x, radius: float, seed: int = 0):
    """``R_x(radius * v)`` for a random unit tangent ``v``."""
    rng = np.random.default_rng(seed)
    v = manifold.random_tangent(x, rng)
    return manifold.retract(x, v * radius)


__all__ = [
    "CompletionInstance",
    "CompletionProblem",
    "CpInstance",
    "CpProblem",
    "SphereLsInstance",
    "completion_start",
    "cp_start",
    "cp_tensor",
    "error_to_truth",
    "gen_completion",
    "gen_cp",
    "gen_sphere_ls",
    "omega_size",
    "perturb",
    "random_completion_point",
    "sphere_ls_problem",
]
