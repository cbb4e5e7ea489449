"""Risk, gradients, and a minimizing-sequence solver that tolerates infima at infinity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .losses import LossKind
from .measure import Problem, margins

__all__ = [
    "Termination",
    "SolverConfig",
    "PrimalTrajectory",
    "risk",
    "grad_risk",
    "minimize",
    "minimize_regularized",
    "excess_risk",
]


class Termination(Enum):
    GRADIENT_SMALL = "GradientSmall"
    ITERATION_CAP = "IterationCap"
    NORM_CAP = "NormCap"
    LINE_SEARCH_STALL = "LineSearchStall"


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 100_000
    grad_tol: float = 1e-10
    norm_cap: float = 1e6
    armijo_c: float = 1e-4
    shrink: float = 0.5
    init_step: float = 1.0
    grow: float = 2.0
    step_rule: str = "armijo"          # hinge always uses diminishing subgradient steps
    record_dense_until: int = 16       # record every t up to here, then powers of two

    def __post_init__(self):
        if self.max_iters < 1 or self.grad_tol < 0 or self.norm_cap <= 0:
            raise ValueError("solver config out of range")


@dataclass
class PrimalTrajectory:
    """Recorded iterates (t, w, risk, l1, l2), termination reason, dual lower bound."""

    iterates: list[tuple[int, np.ndarray, float, float, float]]
    termination: Termination
    inf_estimate: float | None = None
    best_index: int = field(default=-1)

    @property
    def final_w(self) -> np.ndarray:
        return self.iterates[self.best_index][1]

    @property
    def final_risk(self) -> float:
        return self.iterates[self.best_index][2]

    def risks(self) -> np.ndarray:
        return np.array([row[2] for row in self.iterates])


def risk(problem: Problem, w: np.ndarray) -> float:
    m = margins(problem, w)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = problem.loss.eval(m)
    return float(np.dot(problem.measure.masses, vals))


def grad_risk(problem: Problem, w: np.ndarray) -> np.ndarray:
    m = margins(problem, w)
    d = problem.loss.deriv(m)
    coeff = problem.measure.masses * d * (-problem.measure.labels())
    return problem.hypotheses.matrix.T @ coeff


def excess_risk(problem: Problem, w: np.ndarray, inf_estimate: float) -> float:
    return risk(problem, w) - inf_estimate


def _should_record(t: int, dense_until: int) -> bool:
    return t <= dense_until or (t & (t - 1)) == 0


def _descend(value, grad, d: int, config: SolverConfig) -> PrimalTrajectory:
    w = np.zeros(d)
    fw = value(w)
    rows = [(0, w.copy(), fw, 0.0, 0.0)]
    term = Termination.ITERATION_CAP
    alpha = config.init_step
    t_done = 0
    for t in range(1, config.max_iters + 1):
        g = grad(w)
        if np.max(np.abs(g), initial=0.0) <= config.grad_tol:
            term = Termination.GRADIENT_SMALL
            break
        if np.abs(w).sum() > config.norm_cap:
            term = Termination.NORM_CAP
            break
        gg = float(g @ g)
        stalled = False
        backtracked = False
        while True:
            trial = w - alpha * g
            ft = value(trial)
            if ft <= fw - config.armijo_c * alpha * gg:
                break
            alpha *= config.shrink
            backtracked = True
            if alpha < 1e-18:
                stalled = True
                break
        if stalled:
            term = Termination.LINE_SEARCH_STALL
            break
        w, fw, t_done = trial, ft, t
        if _should_record(t, config.record_dense_until):
            rows.append((t, w.copy(), fw, float(np.abs(w).sum()),
                         float(np.linalg.norm(w))))
        if not backtracked:
            alpha = min(alpha * config.grow, 1e15)
    if rows[-1][0] != t_done:
        rows.append((t_done, w.copy(), fw, float(np.abs(w).sum()),
                     float(np.linalg.norm(w))))
    return PrimalTrajectory(iterates=rows, termination=term, best_index=len(rows) - 1)


def _subgradient_descend(problem: Problem, lam: float, config: SolverConfig) -> PrimalTrajectory:
    # Hinge path: diminishing steps 1/sqrt(t), best iterate tracked;
    # the monotone-descent invariant is waived here.
    w = np.zeros(problem.d)

    def value(v):
        return risk(problem, v) + 0.5 * lam * float(v @ v)

    fw = value(w)
    rows = [(0, w.copy(), fw, 0.0, 0.0)]
    best_f, best_w, best_t = fw, w.copy(), 0
    term = Termination.ITERATION_CAP
    t_done = 0
    for t in range(1, config.max_iters + 1):
        g = grad_risk(problem, w) + lam * w
        if np.max(np.abs(g), initial=0.0) <= config.grad_tol:
            term = Termination.GRADIENT_SMALL
            break
        if np.abs(w).sum() > config.norm_cap:
            term = Termination.NORM_CAP
            break
        w = w - (config.init_step / math.sqrt(t)) * g
        fw = value(w)
        t_done = t
        if fw < best_f:
            best_f, best_w, best_t = fw, w.copy(), t
        if _should_record(t, config.record_dense_until):
            rows.append((t, w.copy(), fw, float(np.abs(w).sum()),
                         float(np.linalg.norm(w))))
    if rows[-1][0] != t_done:
        rows.append((t_done, w.copy(), fw, float(np.abs(w).sum()), float(np.linalg.norm(w))))
    rows.append((best_t, best_w, best_f, float(np.abs(best_w).sum()),
                 float(np.linalg.norm(best_w))))
    return PrimalTrajectory(iterates=rows, termination=term, best_index=len(rows) - 1)


def minimize(problem: Problem, config: SolverConfig | None = None) -> PrimalTrajectory:
    """Gradient descent from w = 0 with backtracking Armijo line search.

    Monotone in the objective; termination NormCap signals an infimum
    approached only along unbounded weight sequences.
    """
    config = config or SolverConfig()
    if problem.loss.kind is LossKind.HINGE:
        return _subgradient_descend(problem, 0.0, config)
    return _descend(lambda w: risk(problem, w),
                    lambda w: grad_risk(problem, w),
                    problem.d, config)


def minimize_regularized(problem: Problem, lam: float,
                         config: SolverConfig | None = None) -> PrimalTrajectory:
    """Minimize risk + lam * ||w||_2^2 / 2; lam = 0 delegates to ``minimize``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    config = config or SolverConfig()
    if lam == 0.0:
        return minimize(problem, config)
    if problem.loss.kind is LossKind.HINGE:
        return _subgradient_descend(problem, lam, config)
    return _descend(lambda w: risk(problem, w) + 0.5 * lam * float(w @ w),
                    lambda w: grad_risk(problem, w) + lam * w,
                    problem.d, config)
