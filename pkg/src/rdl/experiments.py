"""Orchestrated experiment suites: convergence and generalization sweeps, the
regularization path, the zero-one oscillation family, and the bound-audit engine."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import condprob
from .dual import SolveDualConfig, dual_from_primal, dual_objective, feasibility_residual, \
    polish_feasibility, solve_dual
from .fixtures import problem_digest, zo_instance, zo_masses
from .losses import LossKind
from .measure import Problem, conditional, margins, sample_problem, subset_problem
from .primal import SolverConfig, minimize, minimize_regularized, risk
from .reporting import AuditRecord, SweepReport
from .structure import BalanceConfig, ThresholdConfig, balance, canonical_difficult_set, \
    difficult_set, luxemburg_norm, norm_bound_audit

__all__ = [
    "AuditParams",
    "convergence_sweep",
    "generalization_sweep",
    "regularization_sweep",
    "zo_oscillation",
    "bound_audit",
]


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("RDL_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    """Run independent jobs, optionally in parallel; results in submission order."""
    workers = _max_workers()
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def convergence_sweep(problem: Problem, solver_config: SolverConfig | None = None) -> SweepReport:
    """Excess risk and model distance along the primal trajectory at geometric checkpoints."""
    if not problem.loss.member_of_Lb:
        raise ValueError("convergence sweep needs a strictly convex bounded-link loss")
    sol = solve_dual(problem, SolveDualConfig(solver=solver_config or SolverConfig()))
    dset = difficult_set(problem, sol)
    limit_model = condprob.from_dual(problem, sol, dset)
    rows = []
    for (t, w, r, l1, l2) in sol.trajectory.iterates:
        model = condprob.from_weights(problem, w)
        rows.append({
            "t": t,
            "risk": r,
            "excess": r - sol.objective,
            "eta_l1": condprob.l1_distance(model, limit_model, problem.measure),
            "l1_norm": l1,
            "l2_norm": l2,
        })
    meta = {"loss": problem.loss.kind.value, "dataset_digest": problem_digest(problem),
            "dual_objective": sol.objective, "termination": sol.trajectory.termination.value}
    return SweepReport(rows=rows, metadata=meta)


def generalization_sweep(population: Problem, n_grid, seeds,
                         solver_config: SolverConfig | None = None) -> SweepReport:
    """Sample, minimize on the sample, measure model distance on the population."""
    if population.measure.n > 1000:
        raise ValueError("population support capped at 1000 points (exact integrals)")
    cfg = solver_config or SolverConfig()
    pop_sol = solve_dual(population, SolveDualConfig(solver=cfg))
    dset = difficult_set(population, pop_sol)
    limit_model = condprob.from_dual(population, pop_sol, dset)

    def one_run(job):
        n, seed = job
        sp = sample_problem(population, n, seed)
        traj = minimize(sp, cfg)
        w = traj.final_w
        dist = condprob.l1_distance(condprob.from_weights(population, w),
                                    limit_model, population.measure)
        emp = polish_feasibility(sp, dual_from_primal(sp, traj).q)
        return {"n": n, "seed": seed, "eta_l1": dist,
                "emp_excess": traj.final_risk - emp.objective}

    jobs = [(int(n), int(s)) for n in n_grid for s in seeds]
    runs = _parallel_map(one_run, jobs)
    rows = []
    for n in n_grid:
        vals = sorted(r["eta_l1"] for r in runs if r["n"] == int(n))
        excesses = [r["emp_excess"] for r in runs if r["n"] == int(n)]
        rows.append({"n": int(n),
                     "median_eta_l1": float(np.median(vals)),
                     "max_emp_excess": float(np.max(excesses)),
                     "values": vals})
    meta = {"loss": population.loss.kind.value, "seeds": [int(s) for s in seeds],
            "dataset_digest": problem_digest(population),
            "population_dual_objective": pop_sol.objective}
    return SweepReport(rows=rows, metadata=meta)


def regularization_sweep(problem: Problem, p_grid=(0.5, 1.0, 2.0, math.inf),
                         splits: int = 5, seed: int = 0,
                         solver_config: SolverConfig | None = None) -> SweepReport:
    """Train/test protocol: lambda = n^(-p) ridge path, median test error over splits."""
    if problem.measure.n < 20:
        raise ValueError("regularization sweep needs at least 20 points")
    cfg = solver_config or SolverConfig(max_iters=5000, grad_tol=1e-8)
    n_all = problem.measure.n
    data_norm = float(np.max(np.linalg.norm(problem.measure.feature_matrix(), axis=1)))

    def one_split(s):
        rng = np.random.default_rng(seed + s)
        perm = rng.permutation(n_all)
        cut = int(round(0.8 * n_all))
        train = subset_problem(problem, np.sort(perm[:cut]))
        test = subset_problem(problem, np.sort(perm[cut:]))
        out = {}
        for p in p_grid:
            lam = 0.0 if math.isinf(p) else float(cut) ** (-p)
            traj = minimize_regularized(train, lam, cfg)
            w = traj.final_w
            out[p] = (condprob.zero_one_risk(test, w),
                      float(np.linalg.norm(w)) * data_norm)
        return out

    per_split = _parallel_map(one_split, list(range(splits)))
    rows = []
    for p in p_grid:
        errs = [ps[p][0] for ps in per_split]
        norms = [ps[p][1] for ps in per_split]
        rows.append({"p": float(p),
                     "lambda_form": "0" if math.isinf(p) else f"n^-{p}",
                     "median_test_error": float(np.median(errs)),
                     "median_scaled_norm": float(np.median(norms)),
                     "errors": errs})
    meta = {"loss": problem.loss.kind.value, "splits": splits, "seed": seed,
            "dataset_digest": problem_digest(problem)}
    return SweepReport(rows=rows, metadata=meta)


def zo_oscillation(epsilon, iters: int = 100,
                   solver_config: SolverConfig | None = None) -> SweepReport:
    """Alternating-classification-error example; errors in exact rational arithmetic.

    The weights w_i = (-1)^i / i converge to the optimum 0 while the zero-one
    error oscillates between the two point masses; the model distance to the
    limit model still goes to 0.
    """
    eps = epsilon if isinstance(epsilon, Fraction) else Fraction(str(epsilon))
    m_a, m_b = zo_masses(eps)
    xs = (Fraction(-1), 1 - eps)
    problem = zo_instance(eps)
    sol = solve_dual(problem, SolveDualConfig(solver=solver_config or SolverConfig()))
    dset = difficult_set(problem, sol)
    limit_model = condprob.from_dual(problem, sol, dset)
    rows = []
    for i in range(1, iters + 1):
        w_exact = Fraction((-1) ** i, i)
        # exact zero-one risk: all labels are +1, sign(0) = +1
        err = Fraction(0)
        for x, m in ((xs[0], m_a), (xs[1], m_b)):
            if w_exact * x < 0:
                err += m
        w = np.array([float(w_exact)])
        model = condprob.from_weights(problem, w)
        rows.append({
            "i": i,
            "w": float(w_exact),
            "zo_risk": err,
            "zo_risk_float": float(err),
            "eta_l1": condprob.l1_distance(model, limit_model, problem.measure),
        })
    meta = {"epsilon": str(eps), "loss": problem.loss.kind.value,
            "odd_error": str(m_b), "even_error": str(m_a),
            "limit_zo_risk": condprob.zero_one_risk(problem, limit_model)}
    return SweepReport(rows=rows, metadata=meta)


# -- bound audits -------------------------------------------------------------

@dataclass(frozen=True)
class AuditParams:
    r: float | None = None
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    delta: float = 0.05
    n: int | None = None
    n_cap: int = 200_000
    seed: int = 0
    threshold: ThresholdConfig = ThresholdConfig()
    balance_config: BalanceConfig = BalanceConfig()


def _grid_inf(fn, lo: float, hi: float, k: int = 2001) -> float:
    xs = np.linspace(lo, hi, k)
    return float(np.min(fn(xs)))


ALL_AUDITS = ("markov_easy_mass", "easy_remainder_integral", "excess_split_difficult",
              "risk_split_easy", "difficult_pos_margin_mass", "difficult_neg_margin_mass",
              "difficult_taylor_integral", "norm_via_balance", "margin_bound_sample")


def bound_audit(problem: Problem, w, dual_solution, params: AuditParams | None = None,
                include: tuple[str, ...] | None = None) -> list[AuditRecord]:
    """Evaluate the quantitative inequalities as exact finite sums.

    The measure is normalized to total mass 1 first (the dual density is scale
    invariant); excess risks are taken against the certified dual lower bound,
    so every record's right-hand side is a valid bound whenever the audited
    statement applies.
    """
    params = params or AuditParams()
    include = include or ALL_AUDITS
    w = np.asarray(w, dtype=float)
    prob = problem.normalized()
    loss = prob.loss
    consts = loss.constants()
    q = np.asarray(dual_solution.q, dtype=float)
    dual_norm = replace(dual_solution,
                        objective=dual_objective(prob, q),
                        feas_residual=feasibility_residual(prob, q))
    obj = dual_norm.objective
    masses = prob.measure.masses
    marg = margins(prob, w)
    r_full = risk(prob, w)
    excess = max(r_full - obj, 0.0)
    dset = difficult_set(prob, dual_norm, params.threshold)
    hard = np.array(dset.indices, dtype=int)
    easy = np.array(dset.complement, dtype=int)

    records: list[AuditRecord] = []

    def emit(name, lhs, rhs, parameters, applicable=True):
        if name in include:
            records.append(AuditRecord(name=name, lhs=float(lhs), rhs=float(rhs),
                                       parameters=parameters, applicable=applicable))

    # (a) Markov mass bound on the easy set, r = sqrt(excess) by default
    r_val = params.r if params.r is not None else math.sqrt(excess)
    if r_val and r_val > 0:
        in_sr = easy[np.asarray(loss.eval(marg[easy]) >= r_val, dtype=bool)] \
            if len(easy) else easy
        emit("markov_easy_mass", masses[in_sr].sum() if len(in_sr) else 0.0,
             excess / r_val, {"r": r_val, "excess": excess})
    else:
        emit("markov_easy_mass", 0.0, 0.0, {"r": r_val, "excess": excess},
             applicable=False)

    # models are needed by (b) and (d)
    limit_model = weight_model = None
    if loss.member_of_Lb:
        limit_model = condprob.from_dual(prob, dual_norm, dset)
        weight_model = condprob.from_weights(prob, w)

    # (b) remainder of the easy set, scaled by max(1/l(0), ratio/deriv(0))
    if "easy_remainder_integral" in include:
        if loss.member_of_Lb and r_val and r_val > 0:
            rest = easy[np.asarray(loss.eval(marg[easy]) < r_val, dtype=bool)] \
                if len(easy) else easy
            lhs = float(np.dot(masses[rest],
                               np.abs(limit_model.values[rest] - weight_model.values[rest]))) \
                if len(rest) else 0.0
            const = max(1.0 / consts.ell_zero, consts.deriv_to_loss_ratio / consts.deriv_zero)
            emit("easy_remainder_integral", lhs,
                 r_val * masses[rest].sum() * const if len(rest) else 0.0,
                 {"r": r_val, "const": const})
        else:
            emit("easy_remainder_integral", 0.0, 0.0, {}, applicable=False)

    # (c) risk splits along the difficult set
    r_hard = float(np.dot(masses[hard], loss.eval(marg[hard]))) if len(hard) else 0.0
    r_easy = float(np.dot(masses[easy], loss.eval(marg[easy]))) if len(easy) else 0.0
    emit("excess_split_difficult", max(r_hard - obj, 0.0), excess,
         {"restricted_risk": r_hard})
    emit("risk_split_easy", r_easy, excess, {})

    # (e') norm bound via balance (also used standalone)
    if "norm_via_balance" in include:
        bal_full = balance(prob.measure, prob.hypotheses, params.balance_config)
        records.append(norm_bound_audit(prob, w, bal_full))

    # (d) difficult-set mass and Taylor bounds; (e) sampled margin bound
    need_d = {"difficult_pos_margin_mass", "difficult_neg_margin_mass",
              "difficult_taylor_integral"} & set(include)
    need_e = "margin_bound_sample" in include
    if (need_d or need_e) and len(hard) == 0:
        for name in sorted(need_d | ({"margin_bound_sample"} if need_e else set())):
            emit(name, 0.0, 0.0, {"difficult_mass": 0.0}, applicable=False)
    elif need_d or need_e:
        star = canonical_difficult_set(prob, threshold=params.threshold)
        cond_meas = conditional(prob.measure, star.indices) if star.indices else None
        bal_star = balance(cond_meas, prob.hypotheses, params.balance_config).value \
            if cond_meas is not None else np.inf
        sbar = consts.deriv_zero
        if cond_meas is not None and np.isfinite(bal_star) and bal_star > 0:
            n_req = params.n if params.n is not None else int(
                math.ceil(256.0 * math.log(8 * prob.d / params.delta) / bal_star ** 2))
            if n_req <= params.n_cap and n_req >= 1:
                emp = sample_problem(prob.with_measure(cond_meas), n_req, params.seed)
                r_hat = risk(emp, w)
                b_w = 2.0 + (consts.ell_zero + 2.0 * r_hat) / (sbar * bal_star)
                sample_ok = True
            else:
                b_w, r_hat, n_req, sample_ok = None, None, n_req, False
        elif bal_star == np.inf:
            # every weight direction is kernel on the difficult set: margins vanish there
            b_w, r_hat, n_req, sample_ok = 2.0, 0.0, 0, True
        else:
            b_w, r_hat, n_req, sample_ok = None, None, 0, False

        if need_e:
            if sample_ok:
                star_idx = np.array(star.indices, dtype=int)
                lhs = float(np.max(np.abs(marg[star_idx]), initial=0.0))
                emit("margin_bound_sample", lhs, b_w,
                     {"n": n_req, "delta": params.delta, "B_w": b_w,
                      "balance_star": bal_star, "emp_risk": r_hat})
            else:
                emit("margin_bound_sample", 0.0, 0.0,
                     {"n_required": n_req, "balance_star": bal_star}, applicable=False)

        if need_d:
            c1 = params.c1 if params.c1 is not None else b_w
            applicable = loss.member_of_Lb and c1 is not None and c1 > 0
            if applicable:
                c2 = params.c2 if params.c2 is not None else float(loss.deriv(-c1))
                c3 = params.c3 if params.c3 is not None else float(loss.deriv(c1))
            else:
                c2 = c3 = None
            if applicable and c2 is not None and c3 is not None and 0 < c2 < c3:
                tau = min(_grid_inf(loss.second_deriv, -c1, c1),
                          _grid_inf(lambda s: loss.second_deriv(loss.conjugate_deriv(s)),
                                    c2, c3))
                qn = luxemburg_norm(q, masses, loss.curvature_conj)
                c_mu = consts.orlicz_domination(1.0)
                hm = marg[hard]
                hq = q[hard]
                s_plus = masses[hard][hm > c1].sum()
                s_minus = masses[hard][(hm < -c1) & (hq >= c2)].sum()
                u_mask = (np.abs(hm) <= c1) & (hq >= c2) & (hq <= c3)
                u_lhs = float(np.dot(masses[hard][u_mask],
                                     np.abs(limit_model.values[hard][u_mask]
                                            - weight_model.values[hard][u_mask])))
                e_hard = max(r_hard - obj, 0.0)
                base = {"c1": c1, "c2": c2, "c3": c3, "tau": tau,
                        "curvature_conj_norm": qn, "c_mu": c_mu}
                emit("difficult_pos_margin_mass", s_plus,
                     r_full / (c1 * sbar), base)
                emit("difficult_neg_margin_mass", s_minus,
                     2.0 * c_mu * qn * r_full / (c1 * c2), base)
                emit("difficult_taylor_integral", u_lhs,
                     consts.link_lipschitz * math.sqrt(2.0 * e_hard / tau)
                     if tau > 0 else np.inf, base)
            else:
                for name in sorted(need_d):
                    emit(name, 0.0, 0.0,
                         {"c1": c1, "c2": c2, "c3": c3}, applicable=False)
    return records
