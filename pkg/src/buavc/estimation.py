"""Position measurements, a constant-velocity Kalman filter, and covariance inflation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathkit import NotSPDError, cholesky, sample_gaussian
from .separators import GaussianPosition


def measure(true_pos, noise_cov, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    return sample_gaussian(true_pos, noise_cov, rng, size)


def cv_model(d: int, dt: float, q: float):
    """Transition F and white-noise-acceleration process covariance Q."""
    I = np.eye(d)
    F = np.block([[I, dt * I], [np.zeros((d, d)), I]])
    Q = q * np.block([[dt ** 3 / 3.0 * I, dt ** 2 / 2.0 * I], [dt ** 2 / 2.0 * I, dt * I]])
    return F, Q


@dataclass(frozen=True, eq=False)
class FilterState:
    mean: np.ndarray  # [p; v]
    cov: np.ndarray
    q: float
    Rm: np.ndarray

    @property
    def dim(self) -> int:
        return self.Rm.shape[0]

    @property
    def position(self) -> GaussianPosition:
        d = self.dim
        return GaussianPosition(self.mean[:d].copy(), self.cov[:d, :d].copy())

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[self.dim:].copy()

    @classmethod
    def initial(cls, p0, Rm, q: float = 0.1, v0=None, vel_var: float = 1.0):
        p0 = np.asarray(p0, dtype=float)
        d = p0.shape[0]
        Rm = np.asarray(Rm, dtype=float)
        v0 = np.zeros(d) if v0 is None else np.asarray(v0, dtype=float)
        P = np.block([[Rm, np.zeros((d, d))], [np.zeros((d, d)), vel_var * np.eye(d)]])
        return cls(np.concatenate([p0, v0]), P, q, Rm)


def kf_predict_update(fs: FilterState, z, dt: float):
    if dt <= 0:
        raise ValueError("dt must be positive")
    d = fs.dim
    F, Q = cv_model(d, dt, fs.q)
    x = F @ fs.mean
    P = F @ fs.cov @ F.T + Q
    H = np.hstack([np.eye(d), np.zeros((d, d))])
    S = H @ P @ H.T + fs.Rm
    K = np.linalg.solve(S, H @ P).T
    x = x + K @ (np.asarray(z, dtype=float) - H @ x)
    IKH = np.eye(2 * d) - K @ H
    # Joseph form keeps P symmetric positive definite
    P = IKH @ P @ IKH.T + K @ fs.Rm @ K.T
    P = 0.5 * (P + P.T)
    try:
        cholesky(P)
    except NotSPDError as exc:
        raise NotSPDError(f"filter covariance lost definiteness: {exc}") from exc
    out = FilterState(x, P, fs.q, fs.Rm)
    return out, out.position


def steady_state_cov(d: int, dt: float, q: float, Rm) -> np.ndarray:
    """Posterior steady-state covariance by fixed-point Riccati iteration."""
    F, Q = cv_model(d, dt, q)
    Rm = np.asarray(Rm, dtype=float)
    H = np.hstack([np.eye(d), np.zeros((d, d))])
    P = np.eye(2 * d)
    for _ in range(100000):
        Pp = F @ P @ F.T + Q
        K = np.linalg.solve(H @ Pp @ H.T + Rm, H @ Pp).T
        Pn = (np.eye(2 * d) - K @ H) @ Pp
        Pn = 0.5 * (Pn + Pn.T)
        if np.max(np.abs(Pn - P)) < 1e-16:
            return Pn
        P = Pn
    return P


@dataclass(frozen=True)
class InflationPolicy:
    factor: float = 1.0

    def __post_init__(self):
        if self.factor < 1.0:
            raise ValueError("inflation factor must be >= 1")


def inflate(other: GaussianPosition, policy: InflationPolicy) -> GaussianPosition:
    f = policy.factor
    return GaussianPosition(other.mean, f * f * other.cov)
