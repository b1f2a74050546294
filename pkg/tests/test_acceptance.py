"""Acceptance criteria. Each test records one PASS/FAIL line with its metrics
(shown in the terminal summary) before asserting the stated tolerance."""

import itertools
import logging
import sys
import time

import numpy as np
import pytest

from rlm import PRESETS, AffineProblem, InsufficientData, RlmConfig, Status, estimate_order, fd_check, rlm_run
from rlm import solve_subproblem
from rlm.baselines import SdConfig, rsd_run
from rlm.manifolds import Euclidean
from rlm.manifolds.base import tree_flatten
from rlm.solver import DENSE_MAX_DIM
from rlm.problems import (
    completion_start,
    cp_start,
    gen_completion,
    gen_cp,
    gen_sphere_ls,
    perturb,
    random_completion_point,
)

SUCCESS = (Status.GRAD_TOL, Status.F_TOL)
KINDS = ("euclid", "sphere", "completion", "completion-cg", "cp", "cp-cg")


@pytest.fixture(autouse=True)
def _quiet_cg():
    # CG breakdown warnings at the rounding floor are expected noise here
    logging.getLogger("rlm").setLevel(logging.ERROR)
    yield
    logging.getLogger("rlm").setLevel(logging.NOTSET)


def random_case(i: int, rng: np.random.Generator):
    """A (problem, point, lambda) triple; kind cycles over every manifold family."""
    kind = KINDS[i % len(KINDS)]
    seed = int(rng.integers(1 << 30))
    if kind == "euclid":
        n = int(rng.integers(1, 7))
        A = rng.standard_normal((int(rng.integers(1, 9)), n))
        p = AffineProblem(Euclidean(n), A, rng.standard_normal(A.shape[0]))
        x = rng.standard_normal(n)
    elif kind == "sphere":
        d = int(rng.integers(2, 7))
        _, p = gen_sphere_ls(d, d + int(rng.integers(0, 4)), zero_residual=bool(rng.integers(2)), seed=seed)
        x = p.manifold.random_point(rng)
    elif kind == "completion":
        _, p = gen_completion(8, 7, 2, 1.5, seed)
        x = random_completion_point(p, seed)
    elif kind == "completion-cg":
        _, p = gen_completion(30, 30, 3, 0.97, seed)
        x = random_completion_point(p, seed)
    elif kind == "cp":
        _, p = gen_cp((5, 4, 3), 2, 5.0, seed)
        x = p.manifold.random_point(rng)
    else:
        _, p = gen_cp((13, 11, 9), 5, 5.0, seed)
        x = cp_start(p, seed)
    lam = float(10 ** rng.uniform(-3, 2))
    return kind, p, x, lam


def brute_force_theta(Jt, F, lam, radius, points=21, shrink=0.5, rounds=60):
    """Grid-refinement minimizer of ``||F + Jt c||^2 + lam ||c||^2`` over frame coordinates."""
    n = Jt.shape[1]
    center = np.zeros(n)
    h = radius
    for _ in range(rounds):
        axes = [np.linspace(c - h, c + h, points) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        r = F[None, :] + grid @ Jt.T
        th = np.einsum("ij,ij->i", r, r) + lam * np.einsum("ij,ij->i", grid, grid)
        center = grid[np.argmin(th)]
        h *= shrink
    return center


def random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


# -- 1 -------------------------------------------------------------------------------
def test_c1_subproblem_correctness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    cfg = RlmConfig(cg_tol_factor=1e-12)
    worst = 0.0
    worst_bf = 0.0
    n_bf = 0
    for i in range(100):
        kind, p, x, lam = random_case(i, rng)
        m = p.manifold
        F = p.residual(x)
        g = p.gradient(x, F)
        sol = solve_subproblem(p, x, lam, cfg, F=F, grad=g)
        res = m.norm(x, p.normal_operator(x, sol.step) + sol.step * lam + g)
        worst = max(worst, res / (1.0 + m.norm(x, g)))
        if m.dim <= 3:
            Jt, basis = p.framed_jacobian(x)
            radius = 1.05 * np.linalg.norm(Jt.T @ F) / lam + 1e-12
            c_bf = brute_force_theta(Jt, F, lam, radius)
            worst_bf = max(worst_bf, float(np.max(np.abs(basis.coordinates(sol.step) - c_bf))))
            n_bf += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and worst_bf <= 2e-4 and n_bf > 0 and elapsed < 10
    verdict(
        "1 subproblem correctness",
        ok,
        f"max residual/(1+|g|) = {worst:.2e}, brute force max coord diff = {worst_bf:.2e} on {n_bf} cases, {elapsed:.1f}s",
    )
    assert ok


# -- 2 -------------------------------------------------------------------------------
def test_c2_coordinate_independence(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    trials = 0
    for i in itertools.count():
        if trials == 50:
            break
        kind, p, x, lam = random_case(i, rng)
        m = p.manifold
        if m.dim > DENSE_MAX_DIM:
            continue  # frames are only materialized on small manifolds
        trials += 1
        base = m.tangent_basis(x)
        steps = []
        for _ in range(2):
            b = base.rotated(random_orthogonal(len(base), rng))
            s = solve_subproblem(p, x, lam, basis=b).step
            steps.append(tree_flatten(m.tangent_to_ambient(x, s)))
        scale = max(np.linalg.norm(steps[0]), 1e-300)
        worst = max(worst, float(np.linalg.norm(steps[0] - steps[1]) / scale))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5
    verdict("2 coordinate independence", ok, f"max relative ambient difference = {worst:.2e}, {elapsed:.1f}s")
    assert ok


# -- 3 and 4: benchmark suite ------------------------------------------------------------
def _suite():
    _, sz = gen_sphere_ls(5, 8, zero_residual=True, seed=0)
    nz, snz = gen_sphere_ls(5, 8, zero_residual=False, seed=0, p=3.0)
    x_s = sz.manifold.random_point(np.random.default_rng(0))
    x_near = perturb(snz.manifold, nz.x_star, 1e-2, seed=0)
    _, cp = gen_cp((5, 4, 3), 2, 5.0, 0)
    _, c_easy = gen_completion(30, 30, 3, 2.0, 1)
    _, c_hard = gen_completion(30, 30, 3, 0.97, 7)
    return [
        ("sphere zero residual", sz, x_s, RlmConfig()),
        ("sphere nonzero residual", snz, x_s, RlmConfig()),
        ("sphere nonzero residual flag_nz", snz, x_near, RlmConfig(flag_nz=True, mu_min=1e6, grad_tol=1e-9)),
        ("cp 5x4x3 r=2", cp, cp_start(cp, 0), PRESETS["cp"]),
        ("completion 30x30 k=3 rs=2.0 warm", c_easy, completion_start(c_easy, 1)[0], PRESETS["completion"]),
        ("completion 30x30 k=3 rs=0.97 cold", c_hard, random_completion_point(c_hard, 7), RlmConfig(max_iter=300)),
    ]


@pytest.fixture(scope="module")
def suite_runs():
    t0 = time.perf_counter()
    runs = []
    for name, p, x0, cfg in _suite():
        moves = []  # (successful, x_before, x_after)
        state = {"x": x0}

        def cb(rec, x, state=state, moves=moves):
            moves.append((rec.successful, state["x"], x))
            state["x"] = x

        s = rlm_run(p, x0, cfg.with_(audit=True), callback=cb)
        runs.append((name, p, s, moves))
    return runs, time.perf_counter() - t0


def test_c3_decrease_audit(verdict, suite_runs):
    runs, elapsed = suite_runs
    iters = sum(s.iters for _, _, s, _ in runs)
    bad = [(name, v) for name, _, s, _ in runs for v in s.violations]
    statuses = ", ".join(f"{name}: {s.status.value} in {s.iters}" for name, _, s, _ in runs)
    ok = not bad and elapsed < 60
    verdict("3 decrease audit", ok, f"{len(bad)} violations over {iters} iterations, {elapsed:.1f}s ({statuses})")
    assert ok, bad[:5]


def test_c4_monotonicity(verdict, suite_runs):
    runs, _ = suite_runs
    problems = []
    for name, p, s, moves in runs:
        fs = [r.f for r in s.trace] + [s.final_f]
        for k, rec in enumerate(s.trace):
            if fs[k + 1] > fs[k]:
                problems.append(f"{name} iter {k}: f increased")
            if rec.successful and not fs[k + 1] < fs[k]:
                problems.append(f"{name} iter {k}: successful without strict decrease")
        for k, (successful, before, after) in enumerate(moves):
            if not successful and not p.manifold.same_point(before, after):
                problems.append(f"{name} iter {k}: x moved on an unsuccessful iteration")
    n_fail = sum(not r.successful for _, _, s, _ in runs for r in s.trace)
    ok = not problems
    verdict("4 monotonicity", ok, f"{len(problems)} problems, {n_fail} unsuccessful iterations checked")
    assert ok, problems[:5]


# -- 5 -------------------------------------------------------------------------------
def _order(values, window):
    try:
        return estimate_order(values, window)
    except InsufficientData:
        return None


def test_c5_local_quadratic_rate(verdict):
    cfg = RlmConfig(grad_tol=1e-12, max_iter=50)
    t0 = time.perf_counter()
    inst, p = gen_sphere_ls(5, 8, zero_residual=True, seed=0)
    s_sph = rlm_run(p, perturb(p.manifold, inst.x_star, 1e-2, seed=0), cfg)
    t_sph = time.perf_counter() - t0

    t0 = time.perf_counter()
    inst, p = gen_completion(20, 20, 2, 2.0, 0)
    # start at relative error 1e-2, matching the unit-norm sphere case
    radius = 1e-2 * np.linalg.norm(inst.ground_truth)
    s_cmp = rlm_run(p, perturb(p.manifold, p.truth_point(), radius, seed=0), cfg)
    t_cmp = time.perf_counter() - t0

    details, ok = [], t_sph < 10 and t_cmp < 10
    for name, s in (("sphere", s_sph), ("completion", s_cmp)):
        g = s.iterate_values("grad_norm")
        fit = _order(g, 4)
        ok = ok and fit is not None and fit.q >= 1.7
        q = "insufficient data" if fit is None else f"q = {fit.q:.2f}"
        details.append(f"{name} {q}, grad = [{', '.join(f'{v:.1e}' for v in g)}]")
    verdict("5 local quadratic rate", ok, "; ".join(details) + f", {t_sph:.2f}s/{t_cmp:.2f}s")
    assert ok


# -- 6 -------------------------------------------------------------------------------
def test_c6_local_linear_rate(verdict):
    t0 = time.perf_counter()
    inst, p = gen_sphere_ls(5, 8, zero_residual=False, seed=0, p=3.0)
    x0 = perturb(p.manifold, inst.x_star, 1e-2, seed=0)
    # mu_min sized so that lambda* = mu_min ||F*||^2 is comparable to the curvature
    s = rlm_run(p, x0, RlmConfig(flag_nz=True, mu_min=1e6, grad_tol=1e-9, max_iter=1000))
    elapsed = time.perf_counter() - t0
    fit = _order(s.iterate_values("grad_norm"), 8)
    ok = s.status in SUCCESS and fit is not None and 0.8 <= fit.q <= 1.3 and fit.c < 1 and elapsed < 10
    detail = "insufficient data" if fit is None else f"q = {fit.q:.3f}, c = {fit.c:.3f}"
    verdict("6 local linear rate", ok, f"{detail}, {s.status.value} after {s.iters} iterations, {elapsed:.2f}s")
    assert ok


# -- 7 -------------------------------------------------------------------------------
# The full study budgets 300 s per run; ten minutes for 100 instances on one core
# leaves about five seconds per instance, split between the three phases.
WARM_BUDGET = 1.2
RLM_BUDGET = 3.0
SD_BUDGET = 0.8


def test_c7_completion_success_rates(verdict):
    t0 = time.perf_counter()
    rs_values = [round(0.90 + 0.01 * i, 2) for i in range(10)]
    lm_ok = {rs: 0 for rs in rs_values}
    sd_ok = {rs: 0 for rs in rs_values}
    for rs, seed in itertools.product(rs_values, range(10)):
        _, p = gen_completion(30, 30, 3, rs, seed)
        x0, _ = completion_start(p, seed, time_budget=WARM_BUDGET)
        lm = rlm_run(p, x0, PRESETS["completion"].with_(time_budget=RLM_BUDGET))
        sd = rsd_run(p, x0, SdConfig(grad_tol=1e-8, max_iter=sys.maxsize, time_budget=SD_BUDGET, initial_step="cauchy"))
        lm_ok[rs] += lm.status in SUCCESS
        sd_ok[rs] += sd.status in SUCCESS
    elapsed = time.perf_counter() - t0
    lm_rate = sum(lm_ok.values()) / 100
    sd_rate = sum(sd_ok.values()) / 100
    ok = lm_rate >= 0.7 and sd_rate <= 0.1 and elapsed < 600
    per_rs = " ".join(f"{rs}:{lm_ok[rs]}/{sd_ok[rs]}" for rs in rs_values)
    verdict(
        "7 completion success rates",
        ok,
        f"RLM {lm_rate:.0%}, RSD {sd_rate:.0%} (per rs RLM/RSD successes {per_rs}), {elapsed:.0f}s",
    )
    assert ok


# -- 8 -------------------------------------------------------------------------------
def test_c8_cp_rank_deficiency(verdict):
    t0 = time.perf_counter()
    finals, done = [], 0
    for seed in range(10):
        _, p = gen_cp((13, 11, 9), 5, 5.0, seed)
        s = rlm_run(p, cp_start(p, seed), PRESETS["cp"])
        finite = all(np.isfinite([r.f, r.grad_norm, r.lam, r.step_norm]).all() for r in s.trace)
        finals.append(s.final_f)
        done += finite and s.status in SUCCESS and s.iters <= 1000 and s.final_f <= 1e-8
    elapsed = time.perf_counter() - t0
    ok = done == 10 and elapsed < 300
    verdict("8 cp rank deficiency", ok, f"{done}/10 runs, max final f = {max(finals):.2e}, {elapsed:.1f}s")
    assert ok


# -- 9 -------------------------------------------------------------------------------
def _classes():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((7, 4))
    yield "affine", AffineProblem(Euclidean(4), A, rng.standard_normal(7)), lambda r: r.standard_normal(4)
    _, p = gen_sphere_ls(5, 8, zero_residual=True, seed=1)
    yield "sphere zero residual", p, p.manifold.random_point
    _, p = gen_sphere_ls(5, 8, zero_residual=False, seed=1, p=3.0)
    yield "sphere nonzero residual", p, p.manifold.random_point
    _, p = gen_completion(30, 30, 3, 0.97, 1)
    yield "completion", p, p.manifold.random_point
    _, p = gen_cp((13, 11, 9), 5, 5.0, 1)
    yield "cp", p, p.manifold.random_point


def test_c9_gradient_adjoint_suite(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = {}
    for name, p, sample in _classes():
        fd, adj = 0.0, 0.0
        for i in range(20):
            rep = fd_check(p, sample(rng), trials=5, seed=i)
            fd, adj = max(fd, rep.max_grad_rel_err), max(adj, rep.max_adjoint_defect)
        worst[name] = (fd, adj)
    elapsed = time.perf_counter() - t0
    ok = all(fd <= 1e-5 and adj <= 1e-10 for fd, adj in worst.values()) and elapsed < 30
    detail = ", ".join(f"{k} fd {fd:.1e} adj {adj:.1e}" for k, (fd, adj) in worst.items())
    verdict("9 gradient/adjoint suite", ok, f"{detail}, {elapsed:.1f}s")
    assert ok
