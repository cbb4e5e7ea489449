"""Command-line entry point: datasets, losses, solvers, structure analysis, experiments.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from pathlib import Path

from . import __version__, condprob, experiments
from .dual import ConvergenceError, SolveDualConfig, solve_dual
from .fixtures import FIXTURES, problem_digest
from .losses import Loss
from .measure import DataError, load_csv, load_libsvm
from .primal import SolverConfig, minimize_regularized
from .reporting import SweepReport, json_bytes, rows_to_csv
from .structure import balance, canonical_difficult_set, difficult_set


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p, data=True, seed_required=False):
    p.add_argument("--loss", choices=["logistic", "exp", "hinge"], default="logistic")
    if data:
        p.add_argument("--data", help="dataset path")
        p.add_argument("--format", choices=["libsvm", "csv"], default="libsvm")
        p.add_argument("--label-col", default="label")
        p.add_argument("--fixture", choices=sorted(FIXTURES), help="bundled instance")
        p.add_argument("--normalize", action="store_true",
                       help="rescale masses to total mass 1 before solving")
    p.add_argument("--seed", type=int, required=seed_required, default=None)
    p.add_argument("--out", help="write the JSON report here (default stdout)")
    p.add_argument("--csv", help="also write row data as CSV here")
    p.add_argument("--max-iters", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="rdl", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("solve-primal"))
    sub.choices["solve-primal"].add_argument("--lambda", dest="lam", type=float, default=0.0)
    _add_common(sub.add_parser("solve-dual"))
    _add_common(sub.add_parser("structure"))
    _add_common(sub.add_parser("eta"))
    _add_common(sub.add_parser("audit"))
    _add_common(sub.add_parser("validate-data"))

    exp = sub.add_parser("experiment")
    exp_sub = exp.add_subparsers(dest="suite", required=True)
    for name in ("converge", "generalize", "regpath", "zo", "audit"):
        sp = exp_sub.add_parser(name)
        _add_common(sp, data=(name != "zo"), seed_required=True)
        if name == "zo":
            sp.add_argument("--epsilon", default="0.5")
            sp.add_argument("--iters", type=int, default=100)
        if name == "generalize":
            sp.add_argument("--n-grid", default="100,1000,10000")
            sp.add_argument("--n-seeds", type=int, default=20)
        if name == "regpath":
            sp.add_argument("--p-grid", default="0.5,1,2,inf")
            sp.add_argument("--splits", type=int, default=5)
    return parser


def _load_problem(args):
    loss = Loss.from_name(args.loss)
    if getattr(args, "fixture", None):
        problem = FIXTURES[args.fixture]().with_loss(loss)
        digest = problem_digest(problem)
    elif getattr(args, "data", None):
        path = Path(args.data)
        if not path.exists():
            raise DataError(f"no such file: {path}")
        loaded = load_csv(path, args.label_col) if args.format == "csv" else load_libsvm(path)
        problem = loaded.to_problem(loss)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
    else:
        raise UsageError("one of --data or --fixture is required")
    if getattr(args, "normalize", False):
        problem = problem.normalized()
    return problem, digest


def _solver_config(args) -> SolverConfig:
    if getattr(args, "max_iters", None):
        return SolverConfig(max_iters=args.max_iters)
    return SolverConfig()


def _meta(args, digest):
    return {"version": __version__, "command": args.command,
            "loss": args.loss, "seed": getattr(args, "seed", None),
            "dataset_digest": digest, "timestamp": time.time()}


def _emit(args, payload, rows=None):
    data = json_bytes(payload)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.decode())
    if args.csv and rows is not None:
        Path(args.csv).write_text(rows_to_csv(rows))


def _cmd_solve_primal(args):
    problem, digest = _load_problem(args)
    traj = minimize_regularized(problem, args.lam, _solver_config(args))
    rows = [{"t": t, "risk": r, "l1_norm": l1, "l2_norm": l2}
            for (t, _, r, l1, l2) in traj.iterates]
    payload = {"meta": _meta(args, digest),
               "w": [float(v) for v in traj.final_w],
               "risk": traj.final_risk,
               "termination": traj.termination.value,
               "rows": rows}
    _emit(args, payload, rows)
    return 0


def _cmd_solve_dual(args):
    problem, digest = _load_problem(args)
    sol = solve_dual(problem, SolveDualConfig(solver=_solver_config(args)))
    payload = {"meta": _meta(args, digest), **sol.to_dict()}
    _emit(args, payload)
    return 0


def _cmd_structure(args):
    problem, digest = _load_problem(args)
    sol = solve_dual(problem, SolveDualConfig(solver=_solver_config(args)))
    dset = difficult_set(problem, sol)
    star = canonical_difficult_set(problem)
    bal = balance(problem.measure, problem.hypotheses)
    payload = {
        "meta": _meta(args, digest),
        "difficult_set": list(dset.indices),
        "canonical_difficult_set": list(star.indices),
        "kernel_dims": int(bal.kernel.dim),
        "balance": bal.value,
        "balance_method": bal.method.value,
        "q_bar": [float(v) for v in sol.q],
    }
    _emit(args, payload)
    return 0


def _cmd_eta(args):
    problem, digest = _load_problem(args)
    sol = solve_dual(problem, SolveDualConfig(solver=_solver_config(args)))
    dset = difficult_set(problem, sol)
    limit_model = condprob.from_dual(problem, sol, dset)
    weight_model = condprob.from_weights(problem, sol.w)
    hard = set(dset.indices)
    rows = []
    for i, p in enumerate(problem.measure.points):
        rows.append({"id": p.id,
                     "x": " ".join(f"{v:.10g}" for v in p.x),
                     "y": p.y,
                     "q_bar": float(sol.q[i]),
                     "eta_bar": float(limit_model.values[i]),
                     "eta_w_final": float(weight_model.values[i]),
                     "in_difficult_set": int(i in hard)})
    payload = {"meta": _meta(args, digest), "rows": rows}
    if args.csv is None and args.out is None:
        sys.stdout.write(rows_to_csv(rows))
    else:
        _emit(args, payload, rows)
    return 0


def _cmd_audit(args):
    problem, digest = _load_problem(args)
    sol = solve_dual(problem, SolveDualConfig(solver=_solver_config(args)))
    params = experiments.AuditParams(seed=args.seed or 0)
    records = experiments.bound_audit(problem, sol.w, sol, params)
    payload = {"meta": _meta(args, digest),
               "audits": [rec.to_dict() for rec in records]}
    _emit(args, payload)
    return 0


def _cmd_validate(args):
    problem, digest = _load_problem(args)
    labels = problem.measure.labels()
    payload = {"meta": _meta(args, digest),
               "points": problem.measure.n,
               "dim": problem.d,
               "positive_mass": float(problem.measure.masses[labels > 0].sum()),
               "total_mass": problem.measure.total_mass,
               "mirrored_points": int((problem.mirror >= 0).sum())}
    _emit(args, payload)
    return 0


def _cmd_experiment(args):
    if args.suite == "zo":
        report = experiments.zo_oscillation(args.epsilon, iters=args.iters)
        digest = f"zo-eps-{args.epsilon}"
    else:
        problem, digest = _load_problem(args)
        cfg = _solver_config(args)
        if args.suite == "converge":
            report = experiments.convergence_sweep(problem, cfg)
        elif args.suite == "generalize":
            n_grid = [int(v) for v in args.n_grid.split(",") if v]
            seeds = [args.seed + k for k in range(args.n_seeds)]
            report = experiments.generalization_sweep(problem, n_grid, seeds, cfg)
        elif args.suite == "regpath":
            p_grid = [math.inf if v.strip() in ("inf", "oo") else float(v)
                      for v in args.p_grid.split(",") if v]
            report = experiments.regularization_sweep(problem, p_grid,
                                                      splits=args.splits,
                                                      seed=args.seed,
                                                      solver_config=cfg)
        else:  # audit
            sol = solve_dual(problem, SolveDualConfig(solver=cfg))
            records = experiments.bound_audit(problem, sol.w, sol,
                                              experiments.AuditParams(seed=args.seed))
            report = SweepReport(rows=[], audits=records)
    payload = {"meta": {**_meta(args, digest), "suite": args.suite},
               **report.to_dict()}
    _emit(args, payload, report.rows)
    return 0


_COMMANDS = {
    "solve-primal": _cmd_solve_primal,
    "solve-dual": _cmd_solve_dual,
    "structure": _cmd_structure,
    "eta": _cmd_eta,
    "audit": _cmd_audit,
    "validate-data": _cmd_validate,
    "experiment": _cmd_experiment,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
