import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlm import AffineProblem, EvaluationError, FunctionProblem, fd_check
from rlm.errors import ContractViolation
from rlm.manifolds import Euclidean, Sphere, TangentVec
from rlm.problems import cp_start, gen_completion, gen_cp, gen_sphere_ls, random_completion_point


def identity_problem(n=2):
    E = Euclidean(n)
    return FunctionProblem(
        E,
        n,
        lambda x: np.asarray(x, dtype=float),
        lambda x, v: v.data.copy(),
        lambda x, u: TangentVec(E, x, np.asarray(u, dtype=float).copy()),
        name="identity",
    )


def test_identity_residual_jacobian_adjoint_gradient():
    p = identity_problem()
    x = np.array([1.0, 2.0])
    np.testing.assert_array_equal(p.residual(x), [1.0, 2.0])
    v = p.manifold.pack(x, [3.0, -1.0])
    np.testing.assert_array_equal(p.apply_jacobian(x, v), [3.0, -1.0])
    np.testing.assert_array_equal(p.apply_adjoint(x, np.array([0.5, 4.0])).data, [0.5, 4.0])
    np.testing.assert_array_equal(p.gradient(x).data, [1.0, 2.0])
    assert p.cost(x) == 2.5


def test_zero_inputs_give_zero_outputs():
    inst, p = gen_completion(10, 9, 2, 1.5, 0)
    x = random_completion_point(p, 1)
    assert not p.apply_jacobian(x, p.manifold.zero(x)).any()
    assert not p.apply_adjoint(x, np.zeros(p.residual_dim)).data.any()


def test_zero_residual_at_truth():
    inst, p = gen_completion(12, 10, 2, 2.0, 3)
    x = p.truth_point()
    assert np.max(np.abs(p.residual(x))) <= 1e-12
    assert p.manifold.norm(x, p.gradient(x)) <= 1e-12


def test_sphere_residual_zero_at_planted_solution():
    inst, p = gen_sphere_ls(5, 8, zero_residual=True, seed=0)
    assert np.max(np.abs(p.residual(inst.x_star))) <= 1e-14


def test_non_finite_residual_raises():
    E = Euclidean(1)
    p = FunctionProblem(E, 1, lambda x: np.array([np.nan]), lambda x, v: v.data, lambda x, u: TangentVec(E, x, u))
    with pytest.raises(EvaluationError):
        p.residual(np.zeros(1))


def test_adjoint_shape_checked():
    p = identity_problem()
    with pytest.raises(ContractViolation):
        p.apply_adjoint(np.zeros(2), np.zeros(3))


def test_affine_problem_shape_checked():
    with pytest.raises(ContractViolation):
        AffineProblem(Sphere(3), np.eye(2), np.zeros(2))


def test_fd_check_quadratic_is_exact():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 4))
    p = AffineProblem(Euclidean(4), A, rng.standard_normal(6))
    rep = fd_check(p, rng.standard_normal(4))
    assert rep.max_grad_rel_err <= 1e-9
    assert rep.max_adjoint_defect <= 1e-14


def test_fd_check_completion_10x10():
    inst, p = gen_completion(10, 10, 2, 1.5, 0)
    rep = fd_check(p, random_completion_point(p, 0))
    assert rep.max_grad_rel_err <= 1e-5
    assert rep.max_adjoint_defect <= 1e-10


def test_fd_check_cp_5x4x3():
    inst, p = gen_cp((5, 4, 3), 2, 5.0, 0)
    rep = fd_check(p, cp_start(p, 0))
    assert rep.max_grad_rel_err <= 1e-5
    assert rep.max_adjoint_defect <= 1e-10


def test_completion_jacobian_samples_ambient_tangent():
    inst, p = gen_completion(8, 7, 2, 2.0, 1)
    x = random_completion_point(p, 2)
    v = p.manifold.random_tangent(x, np.random.default_rng(0))
    amb = p.manifold.tangent_to_ambient(x, v)
    np.testing.assert_allclose(p.apply_jacobian(x, v), amb[inst.rows, inst.cols], atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(-3, 3), st.floats(-3, 3))
def test_jacobian_linear_and_adjoint_identity(seed, a, b):
    inst, p = gen_completion(9, 8, 2, 1.8, seed % 50)
    rng = np.random.default_rng(seed)
    x = random_completion_point(p, seed)
    m = p.manifold
    u, v = m.random_tangent(x, rng), m.random_tangent(x, rng)
    lhs = p.apply_jacobian(x, u * a + v * b)
    rhs = a * p.apply_jacobian(x, u) + b * p.apply_jacobian(x, v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))
    w = rng.standard_normal(p.residual_dim)
    assert abs(m.inner(x, p.apply_adjoint(x, w), v) - w @ p.apply_jacobian(x, v)) <= 1e-10 * (1 + np.linalg.norm(w))


def test_framed_jacobian_matches_operator():
    inst, p = gen_cp((4, 3, 3), 2, 5.0, 1)
    x = cp_start(p, 0)
    Jt, basis = p.framed_jacobian(x)
    assert Jt.shape == (p.residual_dim, p.manifold.dim)
    c = np.random.default_rng(0).standard_normal(p.manifold.dim)
    np.testing.assert_allclose(Jt @ c, p.apply_jacobian(x, basis.combine(c)), atol=1e-12)


def test_jacobian_norm_bounds():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((7, 5))
    p = AffineProblem(Euclidean(5), A, np.zeros(7))
    x = np.zeros(5)
    start = p.manifold.random_tangent(x, rng)
    est = p.jacobian_norm(x, start)
    true = np.linalg.norm(A, 2)
    assert est <= true * (1 + 1e-12)
    assert est >= np.linalg.norm(A @ start.data) / np.linalg.norm(start.data) - 1e-12
    assert est == pytest.approx(true, rel=1e-3)
