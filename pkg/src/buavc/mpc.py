"""Receding-horizon planning inside a cell by single shooting over RK4 dynamics.

Dynamics are numba-compiled functions ``f(x, u, prm, out)`` and
``vjp(x, u, lam, prm, gx, gu)`` so that the rollout and its adjoint gradient
run without Python overhead inside the quasi-Newton loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np
from scipy.optimize import minimize

from .cells import BUAVC

_jit = numba.njit(cache=True, fastmath=False)


class NonFiniteStateError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    name: str
    nx: int
    nu: int
    d: int
    f_nb: Callable
    vjp_nb: Callable
    prm: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray
    brake: Callable  # x -> input that decelerates

    def f(self, x, u) -> np.ndarray:
        out = np.empty(self.nx)
        self.f_nb(np.asarray(x, dtype=float), np.asarray(u, dtype=float), self.prm, out)
        return out

    def vjp(self, x, u, lam):
        gx, gu = np.zeros(self.nx), np.zeros(self.nu)
        self.vjp_nb(np.asarray(x, float), np.asarray(u, float), np.asarray(lam, float), self.prm, gx, gu)
        return gx, gu

    def position(self, x) -> np.ndarray:
        return np.asarray(x)[..., : self.d]

    def velocity(self, x) -> np.ndarray:
        return np.asarray(x)[..., self.d : 2 * self.d]


@_jit
def _di_f(x, u, prm, out):
    d = u.shape[0]
    for i in range(d):
        out[i] = x[d + i]
        out[d + i] = u[i]


@_jit
def _di_vjp(x, u, lam, prm, gx, gu):
    d = u.shape[0]
    for i in range(d):
        gx[i] = 0.0
        gx[d + i] = lam[i]
        gu[i] = lam[d + i]


def double_integrator(d: int = 2, acc_max: float = 1.0, dt_brake: float = 0.05) -> DynamicsModel:
    def brake(x):
        v = np.asarray(x[d:], dtype=float)
        s = float(np.linalg.norm(v))
        if s <= 1e-12:
            return np.zeros(d)
        return -min(acc_max, s / dt_brake) * v / s

    lim = acc_max * np.ones(d)
    return DynamicsModel("double", 2 * d, d, d, _di_f, _di_vjp, np.zeros(1), -lim, lim, brake)


@dataclass(frozen=True)
class QuadrotorParams:
    k_Dx: float = 0.25
    k_Dy: float = 0.33
    k_vz: float = 1.2270
    tau_vz: float = 0.3367
    k_phi: float = 1.1260
    tau_phi: float = 0.2368
    k_theta: float = 1.1075
    tau_theta: float = 0.2318
    g: float = 9.81

    def array(self) -> np.ndarray:
        return np.array([self.k_Dx, self.k_Dy, self.k_vz, self.tau_vz, self.k_phi, self.tau_phi,
                         self.k_theta, self.tau_theta, self.g])


@_jit
def _quad_f(x, u, prm, out):
    kdx, kdy, kvz, tvz, kph, tph, kth, tth, g = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7], prm[8]
    c, s = math.cos(x[8]), math.sin(x[8])
    tp, tt = math.tan(x[6]), math.tan(x[7])
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = g * (c * tt + s * tp) - kdx * x[3]
    out[4] = g * (s * tt - c * tp) - kdy * x[4]
    out[5] = (kvz * u[2] - x[5]) / tvz
    out[6] = (kph * u[0] - x[6]) / tph
    out[7] = (kth * u[1] - x[7]) / tth
    out[8] = u[3]


@_jit
def _quad_vjp(x, u, lam, prm, gx, gu):
    kdx, kdy, kvz, tvz, kph, tph, kth, tth, g = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7], prm[8]
    c, s = math.cos(x[8]), math.sin(x[8])
    tp, tt = math.tan(x[6]), math.tan(x[7])
    lx, ly = lam[3], lam[4]
    gx[0] = 0.0
    gx[1] = 0.0
    gx[2] = 0.0
    gx[3] = lam[0] - kdx * lx
    gx[4] = lam[1] - kdy * ly
    gx[5] = lam[2] - lam[5] / tvz
    gx[6] = g * (1.0 + tp * tp) * (s * lx - c * ly) - lam[6] / tph
    gx[7] = g * (1.0 + tt * tt) * (c * lx + s * ly) - lam[7] / tth
    gx[8] = g * ((-s * tt + c * tp) * lx + (c * tt + s * tp) * ly)
    gu[0] = kph / tph * lam[6]
    gu[1] = kth / tth * lam[7]
    gu[2] = kvz / tvz * lam[5]
    gu[3] = lam[8]


def quadrotor(params: QuadrotorParams = QuadrotorParams(), max_tilt: float = 0.35, max_vz: float = 1.0,
              max_yaw_rate: float = 1.0) -> DynamicsModel:
    """State [p(3), v(3), roll, pitch, yaw]; input [roll_c, pitch_c, vz_c, yaw_rate_c]."""

    p = params
    a_max = 0.9 * p.g * math.tan(max_tilt)

    def brake(x):
        # tilt against the horizontal velocity; level hover once stopped
        a = -np.asarray(x[3:5], dtype=float) / 0.3
        n = float(np.linalg.norm(a))
        if n > a_max:
            a *= a_max / n
        c, s = math.cos(x[8]), math.sin(x[8])
        tt = (c * a[0] + s * a[1]) / p.g
        tp = (s * a[0] - c * a[1]) / p.g
        return np.array([math.atan(tp) / p.k_phi, math.atan(tt) / p.k_theta, 0.0, 0.0])

    lo = np.array([-max_tilt, -max_tilt, -max_vz, -max_yaw_rate])
    return DynamicsModel("quadrotor", 9, 4, 3, _quad_f, _quad_vjp, params.array(), lo, -lo, brake)


@_jit
def _rollout_nb(f, prm, x0, U, dt, X, Y):
    N, nx = U.shape[0], x0.shape[0]
    k1, k2, k3, k4 = np.empty(nx), np.empty(nx), np.empty(nx), np.empty(nx)
    X[0, :] = x0
    for k in range(N):
        x = X[k]
        u = U[k]
        f(x, u, prm, k1)
        for i in range(nx):
            Y[k, 0, i] = x[i] + 0.5 * dt * k1[i]
        f(Y[k, 0], u, prm, k2)
        for i in range(nx):
            Y[k, 1, i] = x[i] + 0.5 * dt * k2[i]
        f(Y[k, 1], u, prm, k3)
        for i in range(nx):
            Y[k, 2, i] = x[i] + dt * k3[i]
        f(Y[k, 2], u, prm, k4)
        for i in range(nx):
            X[k + 1, i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@_jit
def _value_grad_nb(f, vjp, prm, x0, U, dt, d, R, Q, goal, A, b, margin, mu, rho, v_max, w_speed):
    N, nu = U.shape
    nx = x0.shape[0]
    X = np.empty((N + 1, nx))
    Y = np.empty((N, 3, nx))
    _rollout_nb(f, prm, x0, U, dt, X, Y)
    gX = np.zeros((N + 1, nx))
    J = 0.0
    gU = np.zeros((N, nu))
    for k in range(N):
        for i in range(nu):
            acc = 0.0
            for j in range(nu):
                acc += R[i, j] * U[k, j]
            J += U[k, i] * acc
            gU[k, i] = 2.0 * acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += Q[i, j] * (X[N, j] - goal[j])
        J += (X[N, i] - goal[i]) * acc
        gX[N, i] += 2.0 * acc
    m = A.shape[0]
    for k in range(N):
        for l in range(m):
            c = -b[l] + margin
            for i in range(d):
                c += A[l, i] * X[k + 1, i]
            t = mu[k, l] + rho * c
            if t > 0.0:
                J += (t * t - mu[k, l] * mu[k, l]) / (2.0 * rho)
                for i in range(d):
                    gX[k + 1, i] += t * A[l, i]
            else:
                J -= mu[k, l] * mu[k, l] / (2.0 * rho)
        if v_max > 0.0:
            vv = 0.0
            for i in range(d):
                vv += X[k + 1, d + i] ** 2
            ex = vv - v_max * v_max
            if ex > 0.0:
                J += w_speed * ex * ex
                for i in range(d):
                    gX[k + 1, d + i] += 4.0 * w_speed * ex * X[k + 1, d + i]
    lam = gX[N].copy()
    lk = np.empty(nx)
    gx = np.empty(nx)
    gu = np.empty(nu)
    lam_x = np.empty(nx)
    lam_u = np.empty(nu)
    for k in range(N - 1, -1, -1):
        u = U[k]
        for i in range(nx):
            lam_x[i] = lam[i]
        for i in range(nu):
            lam_u[i] = 0.0
        # k4 = f(y4), y4 = x + dt*k3
        for i in range(nx):
            lk[i] = dt / 6.0 * lam[i]
        vjp(Y[k, 2], u, lk, prm, gx, gu)
        for i in range(nx):
            lam_x[i] += gx[i]
            lk[i] = dt / 3.0 * lam[i] + dt * gx[i]
        for i in range(nu):
            lam_u[i] += gu[i]
        # k3 = f(y3), y3 = x + dt/2*k2
        vjp(Y[k, 1], u, lk, prm, gx, gu)
        for i in range(nx):
            lam_x[i] += gx[i]
            lk[i] = dt / 3.0 * lam[i] + 0.5 * dt * gx[i]
        for i in range(nu):
            lam_u[i] += gu[i]
        # k2 = f(y2), y2 = x + dt/2*k1
        vjp(Y[k, 0], u, lk, prm, gx, gu)
        for i in range(nx):
            lam_x[i] += gx[i]
            lk[i] = dt / 6.0 * lam[i] + 0.5 * dt * gx[i]
        for i in range(nu):
            lam_u[i] += gu[i]
        # k1 = f(x)
        vjp(X[k], u, lk, prm, gx, gu)
        for i in range(nx):
            lam[i] = lam_x[i] + gx[i] + gX[k, i]
        for i in range(nu):
            gU[k, i] += lam_u[i] + gu[i]
    return J, gU


def rk4_step(model: DynamicsModel, x, u, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    k1 = model.f(x, u)
    k2 = model.f(x + 0.5 * dt * k1, u)
    k3 = model.f(x + 0.5 * dt * k2, u)
    k4 = model.f(x + dt * k3, u)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError("state became non-finite")
    return out


def rollout(model: DynamicsModel, x0, U, dt: float) -> np.ndarray:
    """States x^0..x^N under the input sequence U (shape (N, nu))."""
    U = np.ascontiguousarray(U, dtype=float)
    X = np.empty((U.shape[0] + 1, model.nx))
    Y = np.empty((U.shape[0], 3, model.nx))
    _rollout_nb(model.f_nb, model.prm, np.asarray(x0, dtype=float), U, dt, X, Y)
    return X


@dataclass(frozen=True)
class MPCConfig:
    N: int = 20
    dt: float = 0.05
    R: Optional[np.ndarray] = None
    Q_N: Optional[np.ndarray] = None
    max_iters: int = 100
    tol: float = 1e-8
    ftol: float = 1e-10
    margin: float = 1e-3  # constraint tightening used inside the solver
    rho: float = 100.0
    outer_iters: int = 6
    v_max: Optional[float] = None  # soft speed cap, quadratic hinge
    w_speed: float = 100.0

    def __post_init__(self):
        if self.N < 1 or self.dt <= 0:
            raise ValueError("need N >= 1 and dt > 0")

    def weights(self, model: DynamicsModel):
        R = 0.1 * np.eye(model.nu) if self.R is None else np.asarray(self.R, dtype=float)
        Q = 10.0 * np.eye(model.d) if self.Q_N is None else np.asarray(self.Q_N, dtype=float)
        return R, Q


@dataclass(frozen=True, eq=False)
class PlannedTrajectory:
    states: np.ndarray  # (N, nx): x^1..x^N
    inputs: np.ndarray  # (N, nu): u^0..u^{N-1}
    max_violation: float
    defect: float
    cost: float
    degraded: bool = False
    fallback: bool = False
    diagnostic: str = ""
    multipliers: Optional[np.ndarray] = field(default=None, repr=False)


class _Problem:
    def __init__(self, model, x0, goal, A, b, cfg: MPCConfig):
        self.model, self.cfg = model, cfg
        self.x0 = np.asarray(x0, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.A = np.ascontiguousarray(A, dtype=float).reshape(-1, model.d)
        self.b = np.asarray(b, dtype=float).reshape(-1)
        self.R, self.Q = cfg.weights(model)
        self.N = cfg.N
        self.n_eval = 0

    def base_cost(self, X, U):
        e = self.model.position(X[-1]) - self.goal
        return float(np.einsum("ki,ij,kj->", U, self.R, U) + e @ self.Q @ e)

    def violation(self, X, margin=0.0):
        if self.A.shape[0] == 0:
            return 0.0
        P = self.model.position(X[1:])
        return float(max(0.0, np.max(P @ self.A.T - self.b + margin)))

    def value_grad(self, z, mu, rho):
        m, cfg = self.model, self.cfg
        self.n_eval += 1
        U = np.ascontiguousarray(z.reshape(self.N, m.nu))
        v_max = -1.0 if cfg.v_max is None else float(cfg.v_max)
        J, gU = _value_grad_nb(m.f_nb, m.vjp_nb, m.prm, self.x0, U, cfg.dt, m.d, self.R, self.Q, self.goal,
                               self.A, self.b, cfg.margin, mu, rho, v_max, cfg.w_speed)
        if not np.isfinite(J):
            return 1e30, np.zeros_like(z)
        return J, gU.reshape(-1)


def braking_plan(model: DynamicsModel, x0, cfg: MPCConfig) -> np.ndarray:
    U = np.empty((cfg.N, model.nu))
    x = np.asarray(x0, dtype=float)
    for k in range(cfg.N):
        U[k] = np.clip(model.brake(x), model.u_lo, model.u_hi)
        x = rk4_step(model, x, U[k], cfg.dt)
    return U


def _make_plan(prob, U, diagnostic="", degraded=False, fallback=False, mu=None):
    X = rollout(prob.model, prob.x0, U, prob.cfg.dt)
    if not np.all(np.isfinite(X)):
        raise NonFiniteStateError("planned trajectory is not finite")
    return PlannedTrajectory(X[1:].copy(), U.copy(), prob.violation(X), 0.0, prob.base_cost(X, U),
                             degraded, fallback, diagnostic, mu)


def plan(x0, goal, cell: BUAVC, model: DynamicsModel, config: MPCConfig = MPCConfig(),
         warm_start: Optional[PlannedTrajectory] = None) -> PlannedTrajectory:
    """Solve the finite-horizon problem; falls back to braking when no feasible plan is found.

    Cell faces are handled by an augmented Lagrangian (tightened by
    ``config.margin``) around L-BFGS-B, which enforces the input box exactly.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise NonFiniteStateError("initial state is not finite")
    if cell.empty:
        prob = _Problem(model, x0, goal, np.zeros((0, model.d)), np.zeros(0), config)
        return _make_plan(prob, braking_plan(model, x0, config), "empty cell", True, True)
    P = cell.polytope
    prob = _Problem(model, x0, goal, P.A, P.b, config)
    N, nu = config.N, model.nu
    lo = np.tile(model.u_lo, N)
    hi = np.tile(model.u_hi, N)
    U_brake = braking_plan(model, x0, config)
    mu = None
    if warm_start is not None:
        z = np.clip(warm_start.inputs.reshape(-1), lo, hi)
        mu = warm_start.multipliers
    else:
        z = U_brake.reshape(-1).copy()
    if mu is None or mu.shape != (N, prob.A.shape[0]):
        mu = np.zeros((N, prob.A.shape[0]))
    rho = config.rho
    bounds = list(zip(lo, hi))
    for _ in range(config.outer_iters):
        res = minimize(prob.value_grad, z, args=(mu, rho), jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": config.max_iters, "ftol": config.ftol, "gtol": config.tol})
        z = np.clip(res.x, lo, hi)
        X = rollout(model, x0, z.reshape(N, nu), config.dt)
        C = model.position(X[1:]) @ prob.A.T - prob.b + config.margin
        mu = np.maximum(0.0, mu + rho * C)
        if prob.violation(X) <= 1e-6:
            break
        rho *= 4.0
    sol = _make_plan(prob, z.reshape(N, nu), mu=mu)
    brake = _make_plan(prob, U_brake, fallback=True)
    feasible_brake = brake.max_violation <= 1e-6
    if sol.max_violation <= 1e-6 and (not feasible_brake or sol.cost <= brake.cost + 1e-12):
        return sol
    if feasible_brake:
        return PlannedTrajectory(brake.states, brake.inputs, brake.max_violation, 0.0, brake.cost, False, True,
                                 "braking plan is cheaper or solver infeasible", None)
    return PlannedTrajectory(brake.states, brake.inputs, brake.max_violation, 0.0, brake.cost, True,
                             True, f"no feasible plan (solver violation {sol.max_violation:.2e})", None)


def shift_warm_start(prev: PlannedTrajectory) -> PlannedTrajectory:
    states = np.vstack([prev.states[1:], prev.states[-1:]])
    inputs = np.vstack([prev.inputs[1:], prev.inputs[-1:]])
    mu = None
    if prev.multipliers is not None:
        mu = np.vstack([prev.multipliers[1:], prev.multipliers[-1:]])
    return PlannedTrajectory(states, inputs, prev.max_violation, prev.defect, prev.cost, prev.degraded,
                             prev.fallback, "shifted", mu)
