"""Difficult/easy set extraction, kernel and balance of a measure, Orlicz norms."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from .losses import EXPONENTIAL, LossKind
from .measure import FiniteMeasure, HypothesisSet, Problem
from .reporting import AuditRecord

__all__ = [
    "nullspace",
    "ThresholdConfig",
    "DifficultSet",
    "difficult_set",
    "canonical_difficult_set",
    "KernelBasis",
    "kernel",
    "BalanceMethod",
    "BalanceConfig",
    "BalanceResult",
    "balance",
    "luxemburg_norm",
    "power_theta",
    "norm_bound_audit",
]


def nullspace(matrix: np.ndarray, rel_cutoff: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the nullspace, by SVD with a relative cutoff."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[1] == 0:
        return np.zeros((0, 0))
    _, svals, vt = np.linalg.svd(matrix, full_matrices=True)
    smax = svals[0] if len(svals) else 0.0
    padded = np.zeros(matrix.shape[1])
    padded[: len(svals)] = svals
    keep = padded <= rel_cutoff * smax
    return vt[keep].T


# -- difficult / easy sets ----------------------------------------------------

@dataclass(frozen=True)
class ThresholdConfig:
    abs_floor: float = 1e-8
    rel: float = 1e-6
    band_factor: float = 10.0
    max_residual: float = 1e-8


@dataclass(frozen=True)
class DifficultSet:
    indices: tuple[int, ...]          # support points with density above threshold
    threshold_used: float
    loss_kind: LossKind
    complement: tuple[int, ...]       # easy support points
    band: tuple[int, ...]             # support points within a decade of the threshold

    def __contains__(self, i: int) -> bool:
        return i in set(self.indices)


class UnpolishedSolutionError(ValueError):
    """Difficult-set extraction needs a feasibility-polished dual solution."""


def difficult_set(problem: Problem, dual_solution,
                  threshold: ThresholdConfig | None = None) -> DifficultSet:
    """Support points whose dual density exceeds the threshold band."""
    threshold = threshold or ThresholdConfig()
    if dual_solution.feas_residual > threshold.max_residual:
        raise UnpolishedSolutionError(
            f"dual residual {dual_solution.feas_residual:g} exceeds "
            f"{threshold.max_residual:g}; polish first")
    sup = problem.measure.support()
    q = np.asarray(dual_solution.q, dtype=float)
    qmax = float(np.max(q[sup], initial=0.0))
    tau = max(threshold.abs_floor, threshold.rel * qmax)
    hard = [int(i) for i in sup if q[i] > tau]
    easy = [int(i) for i in sup if q[i] <= tau]
    band = [int(i) for i in sup
            if tau / threshold.band_factor < q[i] <= tau * threshold.band_factor]
    return DifficultSet(indices=tuple(hard), threshold_used=tau,
                        loss_kind=problem.loss.kind, complement=tuple(easy),
                        band=tuple(band))


def canonical_difficult_set(problem: Problem, solve_config=None,
                            threshold: ThresholdConfig | None = None) -> DifficultSet:
    """Loss-independent maximal difficult set, computed with the exponential loss."""
    from .dual import solve_dual  # deferred: dual imports nullspace from here

    sol = solve_dual(problem.with_loss(EXPONENTIAL), solve_config)
    return difficult_set(problem.with_loss(EXPONENTIAL), sol, threshold)


# -- kernel and balance -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelBasis:
    basis: np.ndarray        # (d, k) orthonormal columns: no effect on risk
    perp_basis: np.ndarray   # (d, d-k) orthonormal columns
    sv_cutoff: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def kernel(measure: FiniteMeasure, hypotheses: HypothesisSet,
           sv_rel_cutoff: float = 1e-10) -> KernelBasis:
    """SVD split of weight space into zero-margin directions and their complement."""
    d = hypotheses.d
    rows = np.sqrt(measure.masses)[:, None] * (-measure.labels()[:, None] * hypotheses.matrix)
    if rows.shape[0] == 0:
        return KernelBasis(basis=np.eye(d), perp_basis=np.zeros((d, 0)),
                           sv_cutoff=0.0)
    _, svals, vt = np.linalg.svd(rows, full_matrices=True)
    smax = svals[0] if len(svals) else 0.0
    padded = np.zeros(d)
    padded[: len(svals)] = svals
    cutoff = sv_rel_cutoff * smax
    in_kernel = padded <= cutoff
    return KernelBasis(basis=vt[in_kernel].T, perp_basis=vt[~in_kernel].T,
                       sv_cutoff=cutoff)


class BalanceMethod(Enum):
    ORTHANT_EXACT = "OrthantExact"
    STOCHASTIC_UPPER = "StochasticUpper"


@dataclass(frozen=True)
class BalanceConfig:
    exact_dim_cap: int = 12
    n_random: int = 10_000
    seed: int = 0
    sv_rel_cutoff: float = 1e-10
    refine_iters: int = 2_000


@dataclass(frozen=True, eq=False)
class BalanceResult:
    value: float                       # +inf iff the kernel is all of weight space
    argmin_direction: np.ndarray | None
    method: BalanceMethod
    certificate: dict | None           # per-orthant minima when exact
    kernel: KernelBasis


def _positive_part_integral(measure, hypotheses, W):
    """Vectorized f(w) = sum_i mass_i * max((Aw)_i, 0) for rows of W."""
    marg = -(measure.labels()[:, None] * hypotheses.matrix) @ W.T
    return np.maximum(marg, 0.0).T @ measure.masses


def _orthant_minimum(a_rows, mass, ker_cols, sign_vec):
    """Exact facet minimum via LP; None if the facet misses the subspace."""
    n, d = a_rows.shape
    c = np.concatenate([np.zeros(d), mass])
    A_ub = np.hstack([a_rows, -np.eye(n)])
    b_ub = np.zeros(n)
    eq_rows = [np.concatenate([sign_vec, np.zeros(n)])]
    for j in range(ker_cols.shape[1]):
        eq_rows.append(np.concatenate([ker_cols[:, j], np.zeros(n)]))
    A_eq = np.vstack(eq_rows)
    b_eq = np.zeros(len(eq_rows))
    b_eq[0] = 1.0
    bounds = [(0.0, None) if s > 0 else (None, 0.0) for s in sign_vec]
    bounds += [(0.0, None)] * n
    res = linprog(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:          # infeasible facet
        return None
    if not res.success:
        return None
    return float(res.fun), res.x[:d]


def balance(measure: FiniteMeasure, hypotheses: HypothesisSet,
            config: BalanceConfig | None = None) -> BalanceResult:
    """Minimal positive-part margin mass over unit-l1 directions orthogonal to the kernel.

    Exhaustive over the 2^d sign orthants (each facet problem is a small LP,
    certified by the solver) up to ``exact_dim_cap`` dimensions; beyond that a
    seeded random search refined by projected subgradient reports an upper
    bound only.
    """
    config = config or BalanceConfig()
    kb = kernel(measure, hypotheses, config.sv_rel_cutoff)
    d = hypotheses.d
    if kb.perp_basis.shape[1] == 0:
        return BalanceResult(value=np.inf, argmin_direction=None,
                             method=BalanceMethod.ORTHANT_EXACT,
                             certificate={}, kernel=kb)
    sup = measure.support()
    a_rows = (-measure.labels()[:, None] * hypotheses.matrix)[sup]
    mass = measure.masses[sup]

    if d <= config.exact_dim_cap:
        best, best_w = np.inf, None
        cert = {}
        for code in range(2 ** d):
            sign_vec = np.array([1.0 if (code >> j) & 1 else -1.0 for j in range(d)])
            out = _orthant_minimum(a_rows, mass, kb.basis, sign_vec)
            if out is None:
                continue
            val, w = out
            cert[tuple(int(s) for s in sign_vec)] = val
            if val < best:
                best, best_w = val, w
        return BalanceResult(value=float(max(best, 0.0)), argmin_direction=best_w,
                             method=BalanceMethod.ORTHANT_EXACT,
                             certificate=cert, kernel=kb)

    # stochastic upper bound: random l1-sphere directions in the complement,
    # then projected subgradient refinement of the best one
    rng = np.random.default_rng(config.seed)
    V = kb.perp_basis
    Z = rng.normal(size=(config.n_random, V.shape[1]))
    W = Z @ V.T
    W /= np.abs(W).sum(axis=1)[:, None]
    vals = _positive_part_integral(measure, hypotheses, W)
    i0 = int(np.argmin(vals))
    w, best = W[i0], float(vals[i0])
    for t in range(1, config.refine_iters + 1):
        marg = a_rows @ w
        g = a_rows.T @ (mass * (marg > 0))
        w_new = w - (0.05 / np.sqrt(t)) * g
        w_new = V @ (V.T @ w_new)
        norm = np.abs(w_new).sum()
        if norm < 1e-12:
            break
        w_new /= norm
        v = float(_positive_part_integral(measure, hypotheses, w_new[None, :])[0])
        if v < best:
            w, best = w_new, v
    return BalanceResult(value=best, argmin_direction=w,
                         method=BalanceMethod.STOCHASTIC_UPPER,
                         certificate=None, kernel=kb)


# -- Luxemburg (Orlicz) norms --------------------------------------------------

def power_theta(p: float):
    """theta(s) = |s|^p, recovering the L_p norms."""
    def theta(s):
        return np.abs(np.asarray(s, dtype=float)) ** p
    return theta


def luxemburg_norm(values, masses, theta, rel_tol: float = 1e-12,
                   bracket_hi: float = 1e15) -> float:
    """Gauge of the unit ball {sum_i mass_i * theta(f_i / r) <= 1}, by bisection.

    Returns 0 for f == 0 (mass-a.e.) and +inf if no bracket up to 1e15 closes
    the ball.
    """
    values = np.asarray(values, dtype=float)
    masses = np.asarray(masses, dtype=float)
    active = masses > 0
    if not active.any() or np.all(values[active] == 0.0):
        return 0.0
    v = values[active]
    m = masses[active]

    def phi(r):
        with np.errstate(over="ignore", invalid="ignore"):
            t = theta(v / r)
        if np.any(np.isnan(t)):
            return np.inf
        return float(np.dot(m, t))

    lo = 1e-12
    hi = max(lo * 2, float(np.max(np.abs(v))) * 1e-6)
    while phi(hi) > 1.0:
        hi *= 8.0
        if hi > bracket_hi:
            return np.inf
    if phi(lo) <= 1.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return hi


def norm_bound_audit(problem: Problem, w, balance_result: BalanceResult) -> AuditRecord:
    """Check ||w_perp||_1 <= risk(w_perp) / (deriv(0) * balance); vacuous at 0 or inf."""
    from .primal import risk  # late import keeps module order flat

    w = np.asarray(w, dtype=float)
    V = balance_result.kernel.perp_basis
    w_perp = V @ (V.T @ w) if V.shape[1] else np.zeros_like(w)
    bal = balance_result.value
    sbar = float(problem.loss.deriv(0.0))
    params = {"balance": bal, "deriv_zero": sbar}
    if not np.isfinite(bal) or bal <= 0.0:
        return AuditRecord(name="norm_via_balance", lhs=0.0, rhs=np.inf,
                           parameters=params, applicable=False)
    lhs = float(np.abs(w_perp).sum())
    rhs = risk(problem, w_perp) / (sbar * bal)
    return AuditRecord(name="norm_via_balance", lhs=lhs, rhs=rhs, parameters=params)
