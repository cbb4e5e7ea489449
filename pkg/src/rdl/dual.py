"""Max-entropy dual of linear-class risk minimization: objective, feasibility,
a solve pipeline with duality-gap certificates, and a small-scale brute force oracle."""

from __future__ import annotations

import weakref
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from .measure import Problem, margins
from .primal import PrimalTrajectory, SolverConfig, minimize

__all__ = [
    "Provenance",
    "DualSolution",
    "SolveDualConfig",
    "ConvergenceError",
    "dual_objective",
    "feasibility_residual",
    "dual_from_primal",
    "polish_feasibility",
    "solve_dual",
    "brute_force_dual",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class Provenance(Enum):
    PRIMAL_LIMIT = "PrimalLimit"
    POLISHED = "Polished"
    BRUTE_FORCE = "BruteForce"


class ConvergenceError(RuntimeError):
    """Feasibility polish did not reach the requested tolerance."""


@dataclass(frozen=True, eq=False)
class DualSolution:
    q: np.ndarray
    objective: float
    feas_residual: float
    gap: float | None
    provenance: Provenance
    w: np.ndarray | None = None
    trajectory: PrimalTrajectory | None = None

    def to_dict(self) -> dict:
        return {
            "q": [float(v) for v in self.q],
            "objective": self.objective,
            "feas_residual": self.feas_residual,
            "gap": self.gap,
            "provenance": self.provenance.value,
        }


@dataclass(frozen=True)
class SolveDualConfig:
    solver: SolverConfig = SolverConfig()
    polish_tol: float = 1e-10
    polish_max_iters: int = 50_000


def dual_objective(problem: Problem, q) -> float:
    """Negative integral of the conjugate; -inf if q leaves the conjugate domain."""
    q = np.asarray(q, dtype=float)
    with np.errstate(invalid="ignore"):
        vals = problem.loss.conjugate(q)
    mass = problem.measure.masses
    active = mass > 0
    if np.any(np.isinf(vals[active])):
        return -np.inf
    return -float(np.dot(mass[active], vals[active]))


def feasibility_residual(problem: Problem, q) -> float:
    """max_j | sum_i mass_i q_i y_i h_j(x_i) |."""
    q = np.asarray(q, dtype=float)
    coeff = problem.measure.masses * q * problem.measure.labels()
    return float(np.max(np.abs(problem.hypotheses.matrix.T @ coeff), initial=0.0))


def dual_from_primal(problem: Problem, trajectory: PrimalTrajectory) -> DualSolution:
    """Candidate density deriv(margins) at the trajectory's final iterate."""
    if not trajectory.iterates:
        raise ValueError("empty trajectory")
    w = trajectory.final_w
    q = np.asarray(problem.loss.deriv(margins(problem, w)), dtype=float)
    obj = dual_objective(problem, q)
    return DualSolution(
        q=q,
        objective=obj,
        feas_residual=feasibility_residual(problem, q),
        gap=trajectory.final_risk - obj,
        provenance=Provenance.PRIMAL_LIMIT,
        w=w,
        trajectory=trajectory,
    )


# Dykstra projection data (weighted pseudoinverse) is cached per problem.
_proj_cache: "weakref.WeakKeyDictionary[Problem, tuple]" = weakref.WeakKeyDictionary()


def _projection_data(problem: Problem):
    data = _proj_cache.get(problem)
    if data is None:
        sup = problem.measure.support()
        W = problem.measure.masses[sup]
        B = (problem.measure.labels()[:, None] * problem.hypotheses.matrix)[sup]
        gram = B.T @ (W[:, None] * B)
        P = np.linalg.pinv(gram)
        data = (sup, W, B, P)
        _proj_cache[problem] = data
    return data


def polish_feasibility(problem: Problem, q0, tol: float = 1e-10,
                       max_iters: int = 50_000,
                       primal_best: float | None = None) -> DualSolution:
    """Dykstra alternating projections onto {A^T q = 0} and the box 0 <= q <= sup(dom).

    The affine projection is least squares in the mass-weighted inner product;
    its pseudoinverse is computed once per problem and cached.  Zero-mass
    coordinates are passed through untouched (densities are almost-everywhere
    objects).
    """
    q0 = np.asarray(q0, dtype=float)
    if np.any(q0 < 0):
        raise ValueError("polish starting point must be nonnegative")
    sup, W, B, P = _projection_data(problem)
    upper = problem.loss.conjugate_sup

    def proj_affine(v):
        return v - B @ (P @ (B.T @ (W * v)))

    x = np.clip(q0[sup], 0.0, upper)
    p = np.zeros_like(x)
    s = np.zeros_like(x)
    best = np.inf
    for _ in range(max_iters):
        yv = proj_affine(x + p)
        p = x + p - yv
        x = np.clip(yv + s, 0.0, upper)
        s = yv + s - x
        res = float(np.max(np.abs(B.T @ (W * x)), initial=0.0))
        best = min(best, res)
        if res <= tol:
            break
    else:
        raise ConvergenceError(
            f"Dykstra polish did not reach tol={tol:g} in {max_iters} iterations "
            f"(best residual {best:g})")
    q = np.clip(q0, 0.0, upper)
    q[sup] = x
    obj = dual_objective(problem, q)
    gap = None if primal_best is None else primal_best - obj
    return DualSolution(q=q, objective=obj,
                        feas_residual=feasibility_residual(problem, q),
                        gap=gap, provenance=Provenance.POLISHED)


def solve_dual(problem: Problem, config: SolveDualConfig | None = None) -> DualSolution:
    """Primal minimizing sequence -> candidate density -> feasibility polish."""
    config = config or SolveDualConfig()
    traj = minimize(problem, config.solver)
    raw = dual_from_primal(problem, traj)
    polished = polish_feasibility(problem, raw.q, tol=config.polish_tol,
                                  max_iters=config.polish_max_iters,
                                  primal_best=traj.final_risk)
    traj.inf_estimate = polished.objective
    return replace(polished, w=traj.final_w, trajectory=traj)


# -- brute force oracle ------------------------------------------------------

@dataclass(frozen=True)
class BruteForceConfig:
    max_points: int = 8
    max_dim: int = 3
    seed: int = 0
    sweep_tol: float = 1e-11
    max_sweeps: int = 400
    random_dirs: int = 8


def _feasible_interval(q, d, upper, lo_pad=0.0):
    """Largest [tlo, thi] with 0 <= q + t*d <= upper componentwise."""
    tlo, thi = -np.inf, np.inf
    pos = d > 1e-300
    neg = d < -1e-300
    if pos.any():
        thi = min(thi, np.min((upper - q[pos]) / d[pos])) if np.isfinite(upper) else thi
        tlo = max(tlo, np.max((lo_pad - q[pos]) / d[pos]))
    if neg.any():
        tlo = max(tlo, np.max((upper - q[neg]) / d[neg])) if np.isfinite(upper) else tlo
        thi = min(thi, np.min((lo_pad - q[neg]) / d[neg]))
    return tlo, thi


def brute_force_dual(problem: Problem, config: BruteForceConfig | None = None) -> DualSolution:
    """Independent small-scale dual maximizer.

    Parametrizes {A^T q = 0} by a nullspace basis, pins the coordinates that
    are forced to zero (detected by per-coordinate feasibility LPs), starts
    from an interior point (max-slack LP), then runs line-search ascent sweeps
    over basis and random nullspace directions until the concave objective
    stops improving.  Exact at desk scale; independent of the solve pipeline.
    """
    from .structure import nullspace  # local import avoids a module cycle

    config = config or BruteForceConfig()
    meas = problem.measure
    sup = meas.support()
    if len(sup) > config.max_points or problem.d > config.max_dim:
        raise ValueError(
            f"brute force capped at {config.max_points} support points / dim {config.max_dim}")

    n_full = meas.n
    if len(sup) == 0:
        return DualSolution(q=np.zeros(n_full), objective=0.0, feas_residual=0.0,
                            gap=None, provenance=Provenance.BRUTE_FORCE)

    W = meas.masses[sup]
    B = (meas.labels()[:, None] * problem.hypotheses.matrix)[sup]
    M = B.T * W  # (d, m) constraint matrix in q-space
    upper = problem.loss.conjugate_sup
    cap = min(upper, 1e3)

    def wrap(q_sup):
        q = np.zeros(n_full)
        q[sup] = q_sup
        return DualSolution(q=q, objective=dual_objective(problem, q),
                            feas_residual=feasibility_residual(problem, q),
                            gap=None, provenance=Provenance.BRUTE_FORCE)

    N = nullspace(M)
    if N.shape[1] == 0:
        return wrap(np.zeros(len(sup)))

    # forced-zero coordinates: max q_i over the feasible polytope is ~0
    m = len(sup)
    forced = []
    for i in range(m):
        res = linprog(c=-N[i], A_ub=np.vstack([-N, N]),
                     b_ub=np.concatenate([np.zeros(m), np.full(m, cap)]),
                     bounds=[(None, None)] * N.shape[1], method="highs")
        if not res.success or -res.fun <= 1e-9:
            forced.append(i)
    if len(forced) == m:
        return wrap(np.zeros(m))
    if forced:
        rows = np.zeros((len(forced), m))
        rows[np.arange(len(forced)), forced] = 1.0
        N = nullspace(np.vstack([M, rows]))
        if N.shape[1] == 0:
            return wrap(np.zeros(m))

    k = N.shape[1]
    free = np.setdiff1d(np.arange(m), np.array(forced, dtype=int))

    # interior start: maximize the smallest free slack
    A_ub = np.zeros((len(free) + m, k + 1))
    b_ub = np.zeros(len(free) + m)
    A_ub[: len(free), :k] = -N[free]
    A_ub[: len(free), k] = 1.0
    A_ub[len(free):, :k] = N
    b_ub[len(free):] = cap
    res = linprog(c=np.concatenate([np.zeros(k), [-1.0]]), A_ub=A_ub, b_ub=b_ub,
                  bounds=[(None, None)] * k + [(0.0, cap)], method="highs")
    q_start = N @ res.x[:k] if res.success else np.zeros(m)
    q_start = np.clip(q_start, 0.0, upper)

    def objective(q_sup):
        qf = np.zeros(n_full)
        qf[sup] = q_sup
        return dual_objective(problem, qf)

    rng = np.random.default_rng(config.seed)
    best_q, best_val = None, -np.inf
    for scale in (1.0, 0.5, 0.1):
        q = q_start * scale
        val = objective(q)
        for _ in range(config.max_sweeps):
            improved = 0.0
            dirs = [N[:, j] for j in range(k)]
            for _ in range(config.random_dirs):
                c = rng.normal(size=k)
                dirs.append(N @ (c / np.linalg.norm(c)))
            for d in dirs:
                tlo, thi = _feasible_interval(q, d, upper)
                if not np.isfinite(thi):
                    thi = 1e3 / max(1e-12, float(np.max(np.abs(d))))
                if not np.isfinite(tlo):
                    tlo = -1e3 / max(1e-12, float(np.max(np.abs(d))))
                if thi - tlo <= 1e-14:
                    continue
                lo, hi = tlo, thi
                c1 = hi - _GOLDEN * (hi - lo)
                c2 = lo + _GOLDEN * (hi - lo)
                f1 = objective(np.clip(q + c1 * d, 0.0, upper))
                f2 = objective(np.clip(q + c2 * d, 0.0, upper))
                for _ in range(90):
                    if f1 < f2:
                        lo, c1, f1 = c1, c2, f2
                        c2 = lo + _GOLDEN * (hi - lo)
                        f2 = objective(np.clip(q + c2 * d, 0.0, upper))
                    else:
                        hi, c2, f2 = c2, c1, f1
                        c1 = hi - _GOLDEN * (hi - lo)
                        f1 = objective(np.clip(q + c1 * d, 0.0, upper))
                t_best = (lo + hi) / 2.0
                cand = np.clip(q + t_best * d, 0.0, upper)
                v = objective(cand)
                if v > val:
                    improved += v - val
                    q, val = cand, v
            if improved <= config.sweep_tol:
                break
        if val > best_val:
            best_q, best_val = q, val
    return wrap(best_q)
