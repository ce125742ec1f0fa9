"""Scalar special functions, small SPD factorizations and seeded Gaussian sampling."""

from __future__ import annotations

import math

import numpy as np

_TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)


class NotSPDError(ValueError):
    """Raised when a matrix expected to be symmetric positive definite is not."""


def erf(x: float) -> float:
    # stdlib erf is accurate to a few ulp; saturate explicitly past |x| = 6
    if x > 6.0:
        return 1.0
    if x < -6.0:
        return -1.0
    return math.erf(x)


def _erf_inv_guess(y: float) -> float:
    # Giles (2010) single-precision rational approximation
    w = -math.log((1.0 - y) * (1.0 + y))
    if w < 5.0:
        w -= 2.5
        p = 2.81022636e-08
        for c in (3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 0.00021858087,
                  -0.00125372503, -0.00417768164, 0.246640727, 1.50140941):
            p = c + p * w
    else:
        w = math.sqrt(w) - 3.0
        p = -0.000200214257
        for c in (0.000100950558, 0.00134934322, -0.00367342844, 0.00573950773,
                  -0.0076224613, 0.00943887047, 1.00167406, 2.83297682):
            p = c + p * w
    return p * y


def erf_inv(y: float) -> float:
    """Inverse error function on (-1, 1).

    A rational initial guess is polished with Newton steps (two in the bulk,
    a few more in the far tails), bringing ``erf(erf_inv(y)) - y`` down to
    machine precision.
    """
    if not -1.0 < y < 1.0:
        raise ValueError(f"erf_inv domain is (-1, 1), got {y!r}")
    if y == 0.0:
        return 0.0
    x = _erf_inv_guess(y)
    # near |y| = 1 the residual is taken through erfc, where 1 - |y| is exact
    tail = abs(y) > 0.5
    s = 1.0 if y > 0 else -1.0
    for it in range(8):
        slope = _TWO_OVER_SQRTPI * math.exp(-x * x)
        if slope == 0.0:
            break
        if tail:
            step = -s * (math.erfc(s * x) - (1.0 - abs(y))) / slope
        else:
            step = (math.erf(x) - y) / slope
        x -= step
        # two steps suffice in the bulk; deep tails may need a few more
        if it >= 1 and abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def chi2_cdf(x: float, d: int) -> float:
    """Chi-squared CDF for 2 or 3 degrees of freedom (closed forms)."""
    if x <= 0.0:
        return 0.0
    if d == 2:
        return -math.expm1(-0.5 * x)
    if d == 3:
        return math.erf(math.sqrt(0.5 * x)) - math.sqrt(2.0 * x / math.pi) * math.exp(-0.5 * x)
    raise ValueError(f"only d in {{2, 3}} supported, got {d}")


def chi2_inv_cdf(p: float, d: int) -> float:
    """Quantile of the chi-squared distribution with ``d`` degrees of freedom."""
    if d not in (2, 3):
        raise ValueError(f"only d in {{2, 3}} supported, got {d}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"probability must lie in [0, 1), got {p!r}")
    if p == 0.0:
        return 0.0
    if d == 2:
        return -2.0 * math.log1p(-p)
    lo, hi = 0.0, 1.0
    while chi2_cdf(hi, d) < p:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, d) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cholesky(S) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == S``; raises NotSPDError otherwise."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSPDError(f"expected a square matrix, got shape {S.shape}")
    if not np.max(np.abs(S - S.T)) <= 1e-12:
        raise NotSPDError("matrix is not symmetric")
    n = S.shape[0]
    L = np.zeros_like(S)
    for j in range(n):
        pivot = S[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 1e-14:
            raise NotSPDError(f"non-positive pivot {pivot:.3e} at index {j}")
        L[j, j] = math.sqrt(pivot)
        for i in range(j + 1, n):
            L[i, j] = (S[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def inv_small(M) -> np.ndarray:
    """Explicit inverse of a 2x2 or 3x3 matrix (falls back to numpy otherwise)."""
    M = np.asarray(M, dtype=float)
    if M.shape == (2, 2):
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det
    return np.linalg.inv(M)


def make_rng(*key: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of non-negative integers."""
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def sample_gaussian(mean, S, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """One draw, or ``size`` draws stacked row-wise."""
    mean = np.asarray(mean, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.all(np.abs(S) <= 1e-18):
        return mean.copy() if size is None else np.tile(mean, (size, 1))
    L = cholesky(S)
    if size is None:
        return mean + L @ rng.standard_normal(mean.shape[0])
    return mean + rng.standard_normal((size, mean.shape[0])) @ L.T
