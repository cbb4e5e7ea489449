"""Conditional probability models: from weights, from the dual optimum, and from the measure."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .losses import ConjugateDomainError, LossKind
from .measure import FiniteMeasure, Problem, margins
from .structure import DifficultSet

__all__ = [
    "ModelSource",
    "CondModel",
    "from_weights",
    "from_dual",
    "from_measure",
    "l1_distance",
    "zero_one_risk",
    "zo_gap_terms",
]


class ModelSource(Enum):
    FROM_WEIGHTS = "FromWeights"
    FROM_DUAL = "FromDual"
    TRUE_ETA = "TrueEta"


@dataclass(frozen=True, eq=False)
class CondModel:
    """Per support point, the modeled probability of that point's own label."""

    values: np.ndarray
    source: ModelSource
    weights: np.ndarray | None = None
    degenerate: np.ndarray | None = None   # TrueEta only: points without a mirror

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if np.any((v < -1e-12) | (v > 1.0 + 1e-12)):
            raise ValueError("conditional probabilities must lie in [0, 1]")

    def prob_positive(self, problem: Problem) -> np.ndarray:
        """Probability of label +1 at each support point."""
        y = problem.measure.labels()
        return np.where(y > 0, self.values, 1.0 - self.values)


def from_weights(problem: Problem, w) -> CondModel:
    """Link applied to the signed score y*(Hw)(x) (the negated margin)."""
    w = np.asarray(w, dtype=float)
    vals = problem.loss.link(-margins(problem, w))
    return CondModel(values=vals, source=ModelSource.FROM_WEIGHTS, weights=w)


def from_dual(problem: Problem, dual_solution, dset: DifficultSet) -> CondModel:
    """Optimal conditional model built from the dual density.

    Difficult points with a mirrored partner use the two densities directly;
    unmirrored ones emulate the flipped-label density through the inverse
    derivative; easy points get probability 1.
    """
    loss = problem.loss
    q = np.asarray(dual_solution.q, dtype=float)
    values = np.ones(problem.n)
    for i in dset.indices:
        qi = q[i]
        j = int(problem.mirror[i])
        if j >= 0:
            qj = q[j]
        else:
            try:
                qj = float(loss.deriv(-loss.conjugate_deriv(qi)))
            except ConjugateDomainError as exc:
                raise ConjugateDomainError(
                    f"point {i}: density {qi!r} at the conjugate-domain boundary "
                    f"and no mirrored partner") from exc
        values[i] = qj / (qj + qi)
    return CondModel(values=values, source=ModelSource.FROM_DUAL)


def _group_by_x(measure: FiniteMeasure) -> dict[bytes, list[int]]:
    groups: dict[bytes, list[int]] = {}
    for i, p in enumerate(measure.points):
        groups.setdefault(p.x.tobytes(), []).append(i)
    return groups


def from_measure(measure: FiniteMeasure) -> CondModel:
    """Underlying conditional probabilities; degenerate (0/1) without a mirror."""
    values = np.ones(measure.n)
    degenerate = np.ones(measure.n, dtype=bool)
    for _, idxs in _group_by_x(measure).items():
        total = float(measure.masses[idxs].sum())
        if total <= 0:
            continue
        for i in idxs:
            values[i] = float(measure.masses[i]) / total
        if len(idxs) == 2:
            degenerate[idxs] = False
    return CondModel(values=values, source=ModelSource.TRUE_ETA, degenerate=degenerate)


def l1_distance(model_a: CondModel, model_b: CondModel, measure: FiniteMeasure) -> float:
    if model_a.values.shape != model_b.values.shape or model_a.values.shape[0] != measure.n:
        raise ValueError("models must share the measure's support")
    return float(np.dot(measure.masses, np.abs(model_a.values - model_b.values)))


def _sign(score: np.ndarray) -> np.ndarray:
    return np.where(score >= 0.0, 1.0, -1.0)   # sign(0) = +1 by convention


def zero_one_risk(problem: Problem, predictor) -> float:
    """Mass fraction of support points whose label disagrees with the predictor sign."""
    if isinstance(predictor, CondModel):
        score = predictor.prob_positive(problem) - 0.5
    else:
        w = np.asarray(predictor, dtype=float)
        score = problem.hypotheses.matrix @ w
    wrong = _sign(score) != problem.measure.labels()
    return float(problem.measure.masses[wrong].sum() / problem.measure.total_mass)


def zo_gap_terms(problem: Problem, limit_model: CondModel, weight_model: CondModel,
                 eta_mu: CondModel | None = None, tie_tol: float = 1e-9) -> dict:
    """Tie-set indices (limit probability exactly 1/2) and the oscillation term.

    The returned ``star`` is | sum over tied x of (2*eta(x,+1) - 1) *
    1[model(x,+1) < 1/2] * marginal mass(x) |.
    """
    if eta_mu is None:
        eta_mu = from_measure(problem.measure)
    meas = problem.measure
    tied = np.abs(limit_model.values - 0.5) <= tie_tol
    lambda_indices = [int(i) for i in np.nonzero(tied)[0] if meas.masses[i] > 0]
    p_plus_w = weight_model.prob_positive(problem)
    p_plus_mu = eta_mu.prob_positive(problem)
    star = 0.0
    for _, idxs in _group_by_x(meas).items():
        mass_x = float(meas.masses[idxs].sum())
        if mass_x <= 0 or not all(tied[i] for i in idxs):
            continue
        i0 = idxs[0]
        star += (2.0 * p_plus_mu[i0] - 1.0) * (1.0 if p_plus_w[i0] < 0.5 else 0.0) * mass_x
    return {"lambda_indices": lambda_indices, "star": abs(star)}
