"""Uncertainty-aware separating hyperplanes between Gaussian robots and obstacles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Hyperplane,
    PointInsidePolytopeError,
    VPolytope,
    dilate,
    max_margin_separator,
    normalize,
)
from .mathkit import chi2_inv_cdf, cholesky, erf


class CoincidentMeansError(ValueError):
    pass


class RobotInsideShadowError(PointInsidePolytopeError):
    pass


class NumericalConsistencyError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianPosition:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class UncertainObstacle:
    """Known convex shape whose translation is ``N(0, translation_cov)``."""

    nominal: VPolytope
    translation_cov: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "translation_cov", np.asarray(self.translation_cov, dtype=float))

    def whitening(self) -> np.ndarray:
        if "W" not in self._cache:
            self._cache["W"] = np.linalg.inv(cholesky(self.translation_cov))
        return self._cache["W"]

    def shadow_whitened(self, delta: float, W=None) -> VPolytope:
        """Dilated shadow in the whitened frame (cached per delta for the default factor)."""
        key = ("shadow", float(delta))
        if W is not None:
            return _shadow(self.nominal, W, delta)
        if key not in self._cache:
            self._cache[key] = _shadow(self.nominal, self.whitening(), delta)
        return self._cache[key]


def shadow_epsilon(delta: float) -> float:
    return 1.0 - math.sqrt(1.0 - delta)


def shadow_radius(delta: float, d: int) -> float:
    return math.sqrt(chi2_inv_cdf(1.0 - shadow_epsilon(delta), d))


def _shadow(nominal: VPolytope, W, delta: float) -> VPolytope:
    return dilate(nominal.transformed(W), shadow_radius(delta, nominal.dim))


def misclassification(h: Hyperplane, gi: GaussianPosition, gj: GaussianPosition):
    """(Pr_i, Pr_j, u1, u2): chance each robot falls on the wrong side of ``h``."""
    a, b = h.a, h.b
    u1 = (b - a @ gi.mean) / math.sqrt(a @ gi.cov @ a)
    u2 = (a @ gj.mean - b) / math.sqrt(a @ gj.cov @ a)
    pr = lambda u: 0.5 - 0.5 * erf(u / math.sqrt(2.0))
    return pr(u1), pr(u2), float(u1), float(u2)


def _solve_t(c2, lam, tol=1e-12, max_iter=200) -> float:
    def resid(t):
        s = 0.0
        for ck, lk in zip(c2, lam):
            den = t + (1.0 - t) * lk
            s += ck * (t * t - (1.0 - t) ** 2 * lk) / (den * den)
        return s

    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if resid(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def best_linear_separator(gi: GaussianPosition, gj: GaussianPosition) -> Hyperplane:
    """Hyperplane minimizing the larger of the two misclassification probabilities.

    With ``a(t) = [t*Si + (1-t)*Sj]^-1 (pj - pi)`` the optimum is the root of
    ``a'(t*t*Si - (1-t)**2 * Sj)a`` on (0, 1). Both covariances are jointly
    diagonalized once so the scalar root search needs no linear solves.
    """
    pij = gj.mean - gi.mean
    dist = float(np.linalg.norm(pij))
    if dist <= 1e-9:
        raise CoincidentMeansError("robot means coincide")
    W = np.linalg.inv(cholesky(gi.cov))
    lam, U = np.linalg.eigh(W @ gj.cov @ W.T)
    c = U.T @ (W @ pij)
    if lam[-1] - lam[0] <= 1e-12 * lam[-1]:
        # proportional covariances: t^2 = (1-t)^2 * lam has a closed-form root
        r = math.sqrt(float(lam.mean()))
        t = r / (1.0 + r)
    else:
        t = _solve_t((c * c).tolist(), lam.tolist())
    s = c / (t + (1.0 - t) * lam)
    a = W.T @ (U @ s)
    b1 = a @ gi.mean + t * float(a @ gi.cov @ a)
    b2 = a @ gj.mean - (1.0 - t) * float(a @ gj.cov @ a)
    n = float(np.linalg.norm(a))
    if abs(b1 - b2) / n > 1e-6 * max(1.0, dist):
        raise NumericalConsistencyError(f"offset expressions disagree by {abs(b1 - b2) / n:.3e}")
    h = normalize(Hyperplane(a, 0.5 * (b1 + b2)))
    if h.a @ gi.mean >= h.b:
        h = h.flipped()
    return h


def obstacle_separator(p_hat, obs: UncertainObstacle, delta: float, W=None) -> Hyperplane:
    """Plane keeping ``p_hat`` clear of the obstacle's shadow for threshold ``delta``.

    ``W`` overrides the whitening factor (any ``W`` with ``W.T @ W = inv(cov)``).
    """
    if not 0.0 < delta < 0.75:
        raise ValueError(f"delta must lie in (0, 0.75), got {delta}")
    p_hat = np.asarray(p_hat, dtype=float)
    if W is None:
        W = obs.whitening()
        shadow = obs.shadow_whitened(delta)
    else:
        W = np.asarray(W, dtype=float)
        shadow = obs.shadow_whitened(delta, W)
    try:
        hw = max_margin_separator(W @ p_hat, shadow)
    except PointInsidePolytopeError as exc:
        raise RobotInsideShadowError(str(exc)) from exc
    return normalize(Hyperplane(W.T @ hw.a, hw.b))
