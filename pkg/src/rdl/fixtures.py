"""Bundled desk-scale instances: figure-style fixtures, the oscillation family,
seeded random generators, and two synthetic datasets for the regularization protocol."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .losses import LOGISTIC, Loss
from .measure import FiniteMeasure, HypothesisSet, Problem
from .reporting import digest_arrays

__all__ = [
    "make_problem",
    "mirror_instance",
    "single_separable",
    "margins_instance",
    "difficult_instance",
    "zo_instance",
    "zo_masses",
    "mixed_population",
    "random_instance",
    "random_weights",
    "dataset_blobs",
    "dataset_noisy_linear",
    "problem_digest",
    "FIXTURES",
]


def make_problem(X, y, masses, loss: Loss, H=None) -> Problem:
    """Build a problem; hypotheses default to the (merged) coordinate features."""
    measure = FiniteMeasure.build(np.asarray(X, dtype=float), y, masses)
    if H is None:
        H = measure.feature_matrix()
    else:
        H = np.asarray(H, dtype=float)
    return Problem.build(measure, HypothesisSet(H), loss)


def mirror_instance(loss: Loss = LOGISTIC) -> Problem:
    """Same x with both labels, equal masses; primal optimum at w = 0."""
    return make_problem([[1.0], [1.0]], [1, -1], [0.5, 0.5], loss)


def single_separable(loss: Loss = LOGISTIC) -> Problem:
    """One positive point; the infimum 0 is approached only at infinity."""
    return make_problem([[1.0]], [1], [1.0], loss)


def margins_instance(loss: Loss = LOGISTIC) -> Problem:
    """Two well-separated clouds; every support point is easy."""
    X = [[0.6, 0.7], [0.7, 0.5], [0.5, 0.6],
         [-0.6, -0.7], [-0.7, -0.5], [-0.5, -0.55]]
    y = [1, 1, 1, -1, -1, -1]
    return make_problem(X, y, np.full(6, 1.0 / 6.0), loss)


def difficult_instance(loss: Loss = LOGISTIC) -> Problem:
    """Separated clouds plus an antisymmetric pair on the orthogonal line.

    The pair (x2 = +-1, both labeled +1) forces density deriv(0) on itself and
    zero on the clouds, so the difficult set is exactly the line points.
    """
    X = [[0.8, 0.3], [0.9, -0.2], [-0.8, 0.25], [-0.85, -0.3],
         [0.0, 1.0], [0.0, -1.0]]
    y = [1, 1, -1, -1, 1, 1]
    return make_problem(X, y, np.full(6, 1.0 / 6.0), loss)


def zo_masses(epsilon) -> tuple[Fraction, Fraction]:
    """Exact point masses ((1-eps)/(2-eps), 1/(2-eps)) of the oscillation family."""
    eps = epsilon if isinstance(epsilon, Fraction) else Fraction(str(epsilon))
    if not 0 <= eps < 1:
        raise ValueError(f"epsilon must be in [0, 1), got {eps}")
    return (1 - eps) / (2 - eps), 1 / (2 - eps)


def zo_instance(epsilon, loss: Loss = LOGISTIC) -> Problem:
    """Two positive points at x = -1 and x = 1-eps; the optimum is w = 0."""
    eps = epsilon if isinstance(epsilon, Fraction) else Fraction(str(epsilon))
    m_a, m_b = zo_masses(eps)
    return make_problem([[-1.0], [float(1 - eps)]], [1, 1],
                        [float(m_a), float(m_b)], loss)


def mixed_population(loss: Loss = LOGISTIC, n_pairs: int = 50, n_cloud: int = 100,
                     seed: int = 7) -> Problem:
    """200-point population: mirrored pairs on a line plus easy clouds.

    The pairs sit on the x1 axis with label probabilities varying along it, so
    the limit model is nondegenerate there; the clouds are separated along x2
    and stay easy.
    """
    rng = np.random.default_rng(seed)
    ts = np.linspace(-0.9, 0.9, n_pairs)
    ps = 1.0 / (1.0 + np.exp(-1.7 * ts))          # target conditional probabilities
    X, y, masses = [], [], []
    pair_mass = 0.6 / n_pairs
    for t, p in zip(ts, ps):
        X.append([t, 0.0]); y.append(1);  masses.append(pair_mass * p)
        X.append([t, 0.0]); y.append(-1); masses.append(pair_mass * (1.0 - p))
    half = n_cloud // 2
    for k in range(n_cloud):
        up = k < half
        x1 = float(rng.uniform(-0.95, 0.95))
        x2 = float(rng.uniform(0.55, 0.95)) * (1.0 if up else -1.0)
        X.append([x1, x2]); y.append(1 if up else -1)
        masses.append(0.4 / n_cloud)
    return make_problem(X, y, masses, loss)


def random_instance(seed: int, loss: Loss = LOGISTIC, n_max: int = 8,
                    d_max: int = 3, mirrored: bool | None = None) -> Problem:
    """Small seeded instance; optionally forces a mirrored (both-labels) pair."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, d_max + 1))
    n = int(rng.integers(max(2, d), n_max + 1))
    if mirrored is None:
        mirrored = bool(rng.integers(0, 2))
    X, y = [], []
    budget = n
    if mirrored and budget >= 2:
        x = rng.uniform(-1, 1, size=d)
        X += [x.copy(), x.copy()]
        y += [1, -1]
        budget -= 2
    for _ in range(budget):
        X.append(rng.uniform(-1, 1, size=d))
        y.append(int(rng.choice([-1, 1])))
    masses = rng.uniform(0.5, 1.5, size=len(X))
    masses /= masses.sum()
    return make_problem(np.vstack(X), y, masses, loss)


def random_weights(seed: int, d: int, scale: float = 1.0) -> np.ndarray:
    return np.random.default_rng(seed).normal(scale=scale, size=d)


def dataset_blobs(loss: Loss = LOGISTIC, n: int = 1500, d: int = 8,
                  seed: int = 11) -> Problem:
    """Two overlapping Gaussian blobs, max-abs scaled to [-1, 1]."""
    rng = np.random.default_rng(seed)
    half = n // 2
    centers = rng.uniform(-0.6, 0.6, size=d)
    Xp = centers + rng.normal(scale=0.55, size=(half, d))
    Xn = -centers + rng.normal(scale=0.55, size=(n - half, d))
    X = np.vstack([Xp, Xn])
    X /= np.abs(X).max(axis=0)
    y = [1] * half + [-1] * (n - half)
    return make_problem(X, y, np.full(n, 1.0 / n), loss)


def dataset_noisy_linear(loss: Loss = LOGISTIC, n: int = 1200, d: int = 6,
                         seed: int = 13, flip: float = 0.12) -> Problem:
    """Linear ground truth with label noise; labels flipped with probability ``flip``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, d))
    w_true = rng.normal(size=d)
    y = np.where(X @ w_true >= 0, 1, -1)
    flips = rng.uniform(size=n) < flip
    y = np.where(flips, -y, y)
    return make_problem(X, y, np.full(n, 1.0 / n), loss)


def problem_digest(problem: Problem) -> str:
    return digest_arrays(problem.measure.feature_matrix(),
                         problem.measure.labels(),
                         problem.measure.masses,
                         problem.hypotheses.matrix)


FIXTURES = {
    "mirror": mirror_instance,
    "separable": single_separable,
    "margins": margins_instance,
    "difficult": difficult_instance,
    "mixed": mixed_population,
    "blobs": dataset_blobs,
    "noisy-linear": dataset_noisy_linear,
}
