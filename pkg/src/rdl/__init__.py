"""Primal/dual machinery for convex risk minimization over linear classes,
with structure extraction and inequality audits at desk scale."""

from .losses import EXPONENTIAL, HINGE, LOGISTIC, Loss, LossKind
from .measure import FiniteMeasure, HypothesisSet, Problem, load_csv, load_libsvm
from .primal import SolverConfig, minimize, minimize_regularized, risk

__version__ = "0.1.0"

__all__ = [
    "Loss", "LossKind", "LOGISTIC", "EXPONENTIAL", "HINGE",
    "FiniteMeasure", "HypothesisSet", "Problem", "load_libsvm", "load_csv",
    "SolverConfig", "minimize", "minimize_regularized", "risk",
    "__version__",
]
