"""Classification losses and every functional derived from them.

The loss zoo is closed: logistic, exponential, hinge.  Each loss carries its
value, (sub)derivative, second derivative, convex conjugate, conjugate
derivative, the probability link, the centered symmetrization ("curvature")
and its conjugate, and the class constants used by the inequality audits.
All evaluations accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit, logit, xlogy

__all__ = [
    "LossKind",
    "Loss",
    "LossConstants",
    "LOGISTIC",
    "EXPONENTIAL",
    "HINGE",
    "UnsupportedLossError",
    "ConjugateDomainError",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class LossKind(Enum):
    LOGISTIC = "logistic"
    EXPONENTIAL = "exp"
    HINGE = "hinge"


class UnsupportedLossError(ValueError):
    """Operation needs smoothness the loss does not have."""


class ConjugateDomainError(ValueError):
    """Argument at or outside the domain of the conjugate derivative."""


@dataclass(frozen=True)
class LossConstants:
    """Computable per-loss constants.

    link_lipschitz: Lipschitz constant of the link (None for hinge).
    deriv_to_loss_ratio: c with deriv(r) <= c * eval(r) for r <= 0 (None for hinge).
    lipschitz: global Lipschitz constant of the loss itself (None for exponential).
    """

    kind: LossKind
    ell_zero: float
    deriv_zero: float
    link_lipschitz: float | None
    deriv_to_loss_ratio: float | None
    lipschitz: float | None

    def orlicz_domination(self, total_mass: float) -> float:
        """Constant c with ||f||_curvature <= c * integral of eval(f), f >= 0.

        For the exponential loss the constant 1/total_mass is only valid for
        total_mass <= 2; other losses use lipschitz / deriv_zero.
        """
        if self.kind is LossKind.EXPONENTIAL:
            if not 0.0 < total_mass <= 2.0:
                raise ValueError(
                    f"exponential-loss domination needs total mass in (0, 2], got {total_mass}"
                )
            return 1.0 / total_mass
        return self.lipschitz / self.deriv_zero


@dataclass(frozen=True)
class Loss:
    kind: LossKind

    # -- class membership -------------------------------------------------
    @property
    def member_of_L(self) -> bool:
        return True

    @property
    def member_of_L2plus(self) -> bool:
        return self.kind is not LossKind.HINGE

    @property
    def member_of_Lb(self) -> bool:
        return self.kind is not LossKind.HINGE

    @property
    def subgradient_convention(self) -> str:
        if self.kind is LossKind.HINGE:
            return "left derivative at the kink: deriv(-1) = 0, deriv(0) = 1"
        return "smooth loss, derivative everywhere"

    @property
    def conjugate_sup(self) -> float:
        """Upper edge of the conjugate domain (sup of the derivative range)."""
        return math.inf if self.kind is LossKind.EXPONENTIAL else 1.0

    @classmethod
    def from_name(cls, name: str) -> "Loss":
        for kind in LossKind:
            if kind.value == name:
                return cls(kind)
        raise ValueError(f"unknown loss {name!r}; expected one of logistic|exp|hinge")

    # -- pointwise functionals --------------------------------------------
    def eval(self, r):
        """Loss value; logistic uses the overflow-safe log-sum-exp form."""
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.LOGISTIC:
            return np.maximum(r, 0.0) + np.log1p(np.exp(-np.abs(r)))
        if self.kind is LossKind.EXPONENTIAL:
            with np.errstate(over="ignore"):
                return np.exp(r)
        return np.maximum(0.0, 1.0 + r)

    def deriv(self, r):
        """A fixed element of the subdifferential at r."""
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.LOGISTIC:
            return expit(r)
        if self.kind is LossKind.EXPONENTIAL:
            with np.errstate(over="ignore"):
                return np.exp(r)
        return np.where(r > -1.0, 1.0, 0.0)

    def second_deriv(self, r):
        if self.kind is LossKind.HINGE:
            raise UnsupportedLossError("hinge loss has no second derivative")
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.LOGISTIC:
            return expit(r) * expit(-r)
        with np.errstate(over="ignore"):
            return np.exp(r)

    def conjugate(self, s):
        """Convex conjugate, extended-real valued (+inf outside the domain)."""
        s = np.asarray(s, dtype=float)
        if self.kind is LossKind.EXPONENTIAL:
            sc = np.maximum(s, 0.0)
            val = xlogy(sc, sc) - sc
            return np.where(s < 0.0, np.inf, val)
        inside = (s >= 0.0) & (s <= 1.0)
        sc = np.clip(s, 0.0, 1.0)
        if self.kind is LossKind.LOGISTIC:
            val = xlogy(sc, sc) + xlogy(1.0 - sc, 1.0 - sc)
        else:
            val = -sc
        return np.where(inside, val, np.inf)

    def conjugate_deriv(self, s):
        """Derivative of the conjugate, i.e. the inverse of deriv."""
        if not self.member_of_L2plus:
            raise UnsupportedLossError("conjugate derivative needs a strictly convex loss")
        s = np.asarray(s, dtype=float)
        if self.kind is LossKind.EXPONENTIAL:
            if np.any(s <= 0.0):
                raise ConjugateDomainError("exponential conjugate derivative needs s > 0")
            return np.log(s)
        if np.any((s <= 0.0) | (s >= 1.0)):
            raise ConjugateDomainError("logistic conjugate derivative needs 0 < s < 1")
        return logit(s)

    def link(self, r):
        """Probability link deriv(r) / (deriv(r) + deriv(-r)), in (0, 1)."""
        if not self.member_of_L2plus:
            raise UnsupportedLossError("link is defined for strictly convex losses only")
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.LOGISTIC:
            return expit(r)
        return expit(2.0 * r)

    def curvature(self, s):
        """Symmetrized loss with the first-order expansion at zero removed."""
        s = np.asarray(s, dtype=float)
        e0 = float(self.eval(0.0))
        d0 = float(self.deriv(0.0))
        b_pos = self.eval(s) - (e0 + s * d0)
        b_neg = self.eval(-s) - (e0 - s * d0)
        return np.maximum(b_pos, b_neg)

    def curvature_conj(self, s):
        """Conjugate of the curvature, extended-real valued.

        Exponential and logistic have closed forms; the hinge (and the brute
        force test oracle) go through a bracketed golden-section maximization
        of the concave inner problem r -> r*s - curvature(r).
        """
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        if self.kind is LossKind.EXPONENTIAL:
            return (1.0 + a) * np.log1p(a) - a
        if self.kind is LossKind.LOGISTIC:
            # eval(r) - r*deriv(0) is even, so curvature(r) = eval(r) - r/2 - ln 2
            # and the conjugate shifts into the loss conjugate.
            return math.log(2.0) + self.conjugate(a + 0.5)
        return curvature_conj_numeric(self, a)

    def constants(self) -> LossConstants:
        if self.kind is LossKind.LOGISTIC:
            return LossConstants(self.kind, math.log(2.0), 0.5, 0.25, 2.0, 1.0)
        if self.kind is LossKind.EXPONENTIAL:
            return LossConstants(self.kind, 1.0, 1.0, 0.5, 1.0, None)
        return LossConstants(self.kind, 1.0, 1.0, None, None, 1.0)


def curvature_conj_numeric(loss: Loss, s, tol: float = 1e-15):
    """sup_r [r*|s| - curvature(r)] by bracket expansion + golden section.

    Vectorized over s.  Returns +inf where the supremum diverges (detected by
    the objective still growing at the expansion cap).
    """
    a = np.abs(np.asarray(s, dtype=float))
    scalar = a.ndim == 0
    a = np.atleast_1d(a)

    def g(r):
        return r * a - loss.curvature(r)

    hi = np.ones_like(a)
    for _ in range(56):
        grew = g(2.0 * hi) > g(hi) + tol
        if not grew.any():
            break
        hi = np.where(grew, 2.0 * hi, hi)
    diverged = g(2.0 * hi) > g(hi) + 1e-9 * np.maximum(1.0, np.abs(g(hi)))

    lo = np.zeros_like(a)
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = g(c), g(d)
    for _ in range(140):
        go_right = fc < fd
        lo = np.where(go_right, c, lo)
        hi = np.where(go_right, hi, d)
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc, fd = g(c), g(d)
    val = np.maximum(g((lo + hi) / 2.0), 0.0)
    out = np.where(diverged, np.inf, val)
    return float(out[0]) if scalar else out


LOGISTIC = Loss(LossKind.LOGISTIC)
EXPONENTIAL = Loss(LossKind.EXPONENTIAL)
HINGE = Loss(LossKind.HINGE)
