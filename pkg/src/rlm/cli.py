"""Command-line harness: ``rlm solve | sweep | check | order``.

Exit codes: 0 success, 1 solver step failure (or failed check), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import GnConfig, SdConfig, rgn_run, rsd_run
from .errors import ContractViolation, InfeasibleError, InsufficientData, RlmError
from .lsq import fd_check
from .manifolds import check_retraction
from .problems import completion_start, cp_start, gen_completion, gen_cp, gen_sphere_ls, random_completion_point
from .solver import PRESETS, estimate_order, rlm_run
from .svg import emit_svg
from .trace import Status, fmt, iterate_values, read_trace_csv, write_summary_json, write_trace_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

REPORT_COLUMNS = ("problem", "seed", "solver", "status", "iters", "succ_iters", "final_f", "final_grad", "wall_ms")
SOLVERS = ("rlm", "rsd", "rgn")
PROBLEMS = ("completion", "cp", "sphere")

# generator defaults per problem kind
PROBLEM_DEFAULTS = {
    "completion": {"m": 30, "n": 30, "k": 3, "rs": 0.97},
    "cp": {"dims": [13, 11, 9], "rank": 5, "p": 5.0},
    "sphere": {"d": 5, "m": 8, "zero_residual": True, "p": 3.0},
}


class UsageError(Exception):
    pass


# -- instances -------------------------------------------------------------
def make_instance(kind: str, params: dict, seed: int):
    params = {**PROBLEM_DEFAULTS[kind], **params}
    if kind == "completion":
        return gen_completion(int(params["m"]), int(params["n"]), int(params["k"]), float(params["rs"]), seed)
    if kind == "cp":
        return gen_cp(params["dims"], int(params["rank"]), float(params["p"]), seed)
    if kind == "sphere":
        return gen_sphere_ls(int(params["d"]), int(params["m"]), bool(params["zero_residual"]), seed, float(params["p"]))
    raise UsageError(f"unknown problem kind {kind!r}")


def start_point(kind: str, problem, seed: int, warm: bool = True):
    """Initial iterate. Completion starts from the steepest-descent warm start
    unless ``warm`` is false."""
    if kind == "completion":
        return completion_start(problem, seed)[0] if warm else random_completion_point(problem, seed)
    if kind == "cp":
        return cp_start(problem, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    return problem.manifold.random_point(rng)


def instance_label(kind: str, params: dict) -> str:
    parts = [kind]
    for key in sorted(params):
        v = params[key]
        if isinstance(v, (list, tuple)):
            v = "x".join(str(a) for a in v)
        parts.append(f"{key}{v}")
    return "_".join(parts)


# -- solvers ---------------------------------------------------------------
def make_config(solver: str, preset: str | None, overrides: dict):
    try:
        if solver == "rlm":
            if preset is not None and preset not in PRESETS:
                raise UsageError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            return PRESETS[preset or "default"].with_(**overrides)
        if preset is not None:
            raise UsageError("presets apply to the rlm solver only")
        if solver == "rsd":
            return SdConfig(**overrides)
        if solver == "rgn":
            return GnConfig(**overrides)
    except TypeError as exc:
        raise UsageError(f"bad {solver} config: {exc}") from exc
    except ContractViolation as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown solver {solver!r}")


def run_solver(solver: str, problem, x0, cfg):
    if solver == "rlm":
        return rlm_run(problem, x0, cfg)
    if solver == "rsd":
        return rsd_run(problem, x0, cfg)
    return rgn_run(problem, x0, cfg)


# -- solve -----------------------------------------------------------------
def _problem_params(args) -> dict:
    if args.problem == "completion":
        keys = ("m", "n", "k", "rs")
    elif args.problem == "cp":
        keys = ("dims", "rank", "p")
    else:
        keys = ("d", "m", "p")
    out = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if args.problem == "sphere":
        out["zero_residual"] = not args.nonzero_residual
    return out


def _solver_overrides(args) -> dict:
    names = {
        "rlm": ("eta", "mu_min", "beta", "grad_tol", "f_tol", "max_iter", "time_budget", "subproblem"),
        "rsd": ("grad_tol", "f_tol", "max_iter", "time_budget"),
        "rgn": ("grad_tol", "f_tol", "max_iter", "time_budget"),
    }[args.solver]
    out = {k: getattr(args, k) for k in names if getattr(args, k) is not None}
    if args.solver == "rlm":
        if args.flag_nz:
            out["flag_nz"] = True
        if args.audit:
            out["audit"] = True
    elif args.flag_nz or args.audit or any(getattr(args, k) is not None for k in ("eta", "mu_min", "beta", "subproblem")):
        raise UsageError(f"LM options do not apply to solver {args.solver!r}")
    return out


def cmd_solve(args) -> int:
    params = _problem_params(args)
    cfg = make_config(args.solver, args.preset, _solver_overrides(args))
    inst, problem = make_instance(args.problem, params, args.seed)
    x0 = start_point(args.problem, problem, args.seed, warm=not args.cold_start)
    summary = run_solver(args.solver, problem, x0, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(summary.trace, out / "trace.csv")
    write_summary_json(summary, out / "summary.json", {"instance": inst.descriptor()})
    if args.plot:
        if summary.trace:
            emit_svg(summary.trace, args.plot_column, args.plot)
        else:
            print("empty trace, no plot written", file=sys.stderr)
    print(f"{summary.solver} {summary.status} iters={summary.iters} f={summary.final_f:.3e} grad={summary.final_grad:.3e}")
    return EXIT_FAIL if summary.status is Status.STEP_FAILURE else EXIT_OK


# -- sweep -----------------------------------------------------------------
def load_experiment(path) -> dict:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read experiment spec: {exc}") from exc
    kind = spec.get("problem")
    if kind not in PROBLEMS:
        raise UsageError(f"problem must be one of {PROBLEMS}, got {kind!r}")
    seeds = spec.get("seeds")
    if not seeds or len(set(seeds)) != len(seeds):
        raise UsageError("seeds must be a non-empty list of unique integers")
    solvers = spec.get("solvers") or [{"name": "rlm"}]
    for s in solvers:
        # validates names, presets and config keys up front
        make_config(s.get("name", "rlm"), s.get("preset"), s.get("config", {}))
    grid = spec.get("grid", {})
    if any(not isinstance(v, list) or not v for v in grid.values()):
        raise UsageError("grid values must be non-empty lists")
    return {
        "problem": kind,
        "params": spec.get("params", {}),
        "grid": grid,
        "solvers": solvers,
        "seeds": [int(s) for s in seeds],
        "warm_start": spec.get("warm_start", True),
        "output": spec.get("output", "sweep_out"),
    }


def expand_grid(params: dict, grid: dict) -> list[dict]:
    keys = list(grid)
    return [{**params, **dict(zip(keys, combo))} for combo in itertools.product(*(grid[k] for k in keys))]


def _sweep_task(task) -> list[dict]:
    kind, params, seed, solvers, warm, trace_dir = task
    label = instance_label(kind, params)
    try:
        _, problem = make_instance(kind, params, seed)
    except InfeasibleError as exc:
        return [
            {"problem": label, "seed": seed, "solver": s.get("name", "rlm"), "status": "Infeasible", "iters": 0,
             "succ_iters": 0, "final_f": math.nan, "final_grad": math.nan, "wall_ms": 0.0, "message": str(exc)}
            for s in solvers
        ]
    x0 = start_point(kind, problem, seed, warm)
    rows = []
    for s in solvers:
        name = s.get("name", "rlm")
        cfg = make_config(name, s.get("preset"), s.get("config", {}))
        summary = run_solver(name, problem, x0, cfg)
        tag = s.get("tag", name)
        write_trace_csv(summary.trace, Path(trace_dir) / f"{label}_seed{seed}_{tag}.csv")
        rows.append(
            {"problem": label, "seed": seed, "solver": tag, "status": str(summary.status), "iters": summary.iters,
             "succ_iters": summary.succ_iters, "final_f": summary.final_f, "final_grad": summary.final_grad,
             "wall_ms": summary.wall_ms}
        )
    return rows


def sweep_workers(n_tasks: int) -> int:
    """Worker processes for a sweep: ``RLM_THREADS`` if set, else the CPU count."""
    cap = os.cpu_count() or 1
    env = os.environ.get("RLM_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            pass
    return max(1, min(cap, n_tasks))


def aggregate(rows: list[dict]) -> dict:
    """Per-solver run count, successes (GradTol or FTol) and means over successes."""
    out = {}
    for name in dict.fromkeys(r["solver"] for r in rows):
        mine = [r for r in rows if r["solver"] == name]
        ok = [r for r in mine if r["status"] in (Status.GRAD_TOL.value, Status.F_TOL.value)]
        out[name] = {
            "runs": len(mine),
            "success": len(ok),
            "mean_iters": float(np.mean([r["iters"] for r in ok])) if ok else None,
            "mean_wall_ms": float(np.mean([r["wall_ms"] for r in ok])) if ok else None,
        }
    return out


def run_sweep(spec: dict, out: Path, workers: int | None = None) -> tuple[list[dict], dict]:
    out.mkdir(parents=True, exist_ok=True)
    trace_dir = out / "traces"
    trace_dir.mkdir(exist_ok=True)
    tasks = [
        (spec["problem"], params, seed, spec["solvers"], spec["warm_start"], str(trace_dir))
        for params in expand_grid(spec["params"], spec["grid"])
        for seed in spec["seeds"]
    ]
    workers = workers or sweep_workers(len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = [r for group in results for r in group]
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r["problem"], r["seed"], r["solver"], r["status"], r["iters"], r["succ_iters"],
                        fmt(r["final_f"]), fmt(r["final_grad"]), fmt(r["wall_ms"])])
    agg = aggregate(rows)
    (out / "aggregate.json").write_text(json.dumps(agg, indent=2, sort_keys=True) + "\n")
    return rows, agg


def cmd_sweep(args) -> int:
    spec = load_experiment(args.spec)
    out = Path(args.out or spec["output"])
    rows, agg = run_sweep(spec, out)
    for name, a in agg.items():
        print(f"{name}: {a['success']}/{a['runs']} succeeded")
    return EXIT_FAIL if any(r["status"] == Status.STEP_FAILURE.value for r in rows) else EXIT_OK


# -- check -----------------------------------------------------------------
def cmd_check(args) -> int:
    params = _problem_params(args)
    ok = True
    _, problem = make_instance(args.problem, params, args.seed)
    m = problem.manifold
    for i in range(args.points):
        x = start_point(args.problem, problem, args.seed + 1000 + i, warm=False)
        rep = fd_check(problem, x, trials=args.trials, seed=i)
        rng = np.random.default_rng(i)
        diag = check_retraction(m, x, m.random_tangent(x, rng))
        good = rep.max_grad_rel_err <= args.grad_tol and rep.max_adjoint_defect <= args.adjoint_tol
        ok &= good
        print(
            f"point {i}: grad_rel_err={rep.max_grad_rel_err:.2e} adjoint_defect={rep.max_adjoint_defect:.2e} "
            f"retraction_slope={diag.defect_slope:.2f} {'ok' if good else 'FAIL'}"
        )
    return EXIT_OK if ok else EXIT_FAIL


# -- order -----------------------------------------------------------------
def cmd_order(args) -> int:
    try:
        rows = read_trace_csv(args.trace)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read trace: {exc}") from exc
    final = None
    if args.summary:
        s = json.loads(Path(args.summary).read_text())
        final = s.get({"grad_norm": "final_grad", "f": "final_f"}.get(args.column, ""))
        final = None if final is None else float(final)
    if rows and args.column not in ("iter",) and ({"lambda": "lam"}.get(args.column, args.column) not in rows[0]):
        raise UsageError(f"unknown column {args.column!r}")
    values = iterate_values(rows, args.column, final)
    try:
        fit = estimate_order(values, args.window)
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"q={fit.q:.4f} c={fit.c:.4g} points={min(len(values), args.window or len(values))}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------
def _add_problem_args(p):
    p.add_argument("--problem", choices=PROBLEMS, default="completion")
    p.add_argument("--m", type=int, help="rows (completion) or residual count (sphere)")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rs", type=float, help="oversampling factor")
    p.add_argument("--dims", type=int, nargs=3)
    p.add_argument("--rank", type=int)
    p.add_argument("--p", type=float, help="noise exponent")
    p.add_argument("--d", type=int, help="ambient dimension (sphere)")
    p.add_argument("--nonzero-residual", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlm", description="Riemannian Levenberg-Marquardt benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one solver on one generated instance")
    _add_problem_args(ps)
    ps.add_argument("--solver", choices=SOLVERS, default="rlm")
    ps.add_argument("--preset", choices=sorted(PRESETS))
    ps.add_argument("--eta", type=float)
    ps.add_argument("--mu-min", type=float)
    ps.add_argument("--beta", type=float)
    ps.add_argument("--flag-nz", action="store_true")
    ps.add_argument("--grad-tol", type=float)
    ps.add_argument("--f-tol", type=float)
    ps.add_argument("--max-iter", type=int)
    ps.add_argument("--time-budget", type=float)
    ps.add_argument("--subproblem", choices=("auto", "dense", "cg"))
    ps.add_argument("--audit", action="store_true", help="check the per-iteration decrease bounds")
    ps.add_argument("--cold-start", action="store_true", help="skip the completion warm start")
    ps.add_argument("--out", default=".")
    ps.add_argument("--plot", help="write an SVG convergence plot here")
    ps.add_argument("--plot-column", default="f")
    ps.set_defaults(func=cmd_solve)

    pw = sub.add_parser("sweep", help="run an experiment spec (JSON)")
    pw.add_argument("--spec", required=True)
    pw.add_argument("--out")
    pw.set_defaults(func=cmd_sweep)

    pc = sub.add_parser("check", help="finite-difference, adjoint and retraction diagnostics")
    _add_problem_args(pc)
    pc.add_argument("--points", type=int, default=5)
    pc.add_argument("--trials", type=int, default=10)
    pc.add_argument("--grad-tol", type=float, default=1e-5)
    pc.add_argument("--adjoint-tol", type=float, default=1e-10)
    pc.set_defaults(func=cmd_check)

    po = sub.add_parser("order", help="estimate the convergence order of a trace column")
    po.add_argument("--trace", required=True)
    po.add_argument("--column", default="grad_norm")
    po.add_argument("--window", type=int)
    po.add_argument("--summary", help="summary.json supplying the final value")
    po.set_defaults(func=cmd_order)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rlm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractViolation, InfeasibleError) as exc:
        print(f"rlm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RlmError as exc:
        print(f"rlm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
