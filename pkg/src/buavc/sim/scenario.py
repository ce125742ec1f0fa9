"""Declarative simulation setup."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

DYNAMICS = ("single", "double", "diffdrive", "mpc:double", "mpc:quadrotor")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class RobotSpec:
    start: tuple
    goal: tuple
    dynamics: str = "single"
    r_s: float = 0.2
    v_max: float = 0.4
    acc_max: float = 1.0
    own_cov: tuple = ((0.04 ** 2, 0.0), (0.0, 0.04 ** 2))
    others_cov: Optional[tuple] = ((0.06 ** 2, 0.0), (0.0, 0.06 ** 2))
    sensing_range: float = 2.0
    theta0: float = 0.0
    k: float = 1.0
    omega_max: float = 2.0


@dataclass(frozen=True)
class ObstacleSpec:
    vertices: tuple
    translation_cov: tuple


@dataclass(frozen=True)
class DeadlockParams:
    n_dead: int = 20
    dp_min: float = 0.05


@dataclass(frozen=True)
class KFParams:
    q: float = 0.1
    r: float = 0.06  # measurement noise standard deviation (m)


@dataclass(frozen=True)
class EstimationParams:
    mode: str = "direct"  # "direct" | "kf" | "exact"
    inflation_factor: Optional[float] = None
    kf: KFParams = field(default_factory=KFParams)


@dataclass(frozen=True)
class MPCParams:
    N: int = 20
    dt: float = 0.05
    v_max: Optional[float] = 1.0
    max_tilt: float = 0.35
    max_vz: float = 1.0
    r_weight: float = 0.1
    qn_weight: float = 10.0


@dataclass(frozen=True)
class Scenario:
    version: int = 1
    dimension: int = 2
    workspace: tuple = ((-5.0, -5.0), (5.0, 5.0))
    dt: float = 0.1
    max_steps: int = 800
    delta: float = 0.05
    goal_tolerance: float = 0.1
    seed: int = 0
    robots: tuple = ()
    obstacles: tuple = ()
    deadlock: DeadlockParams = field(default_factory=DeadlockParams)
    estimation: EstimationParams = field(default_factory=EstimationParams)
    stopping_buffer: bool = False
    method: str = "buavc"  # "buavc" | "bvc"
    bvc_inflation: float = 0.1
    mpc: MPCParams = field(default_factory=MPCParams)

    def with_robots(self, robots) -> "Scenario":
        return replace(self, robots=tuple(robots))


def validate(sc: Scenario) -> None:
    d = sc.dimension
    if d not in (2, 3):
        raise ScenarioError(f"dimension must be 2 or 3, got {d}")
    lo, hi = np.asarray(sc.workspace[0], float), np.asarray(sc.workspace[1], float)
    if lo.shape != (d,) or hi.shape != (d,) or np.any(hi <= lo):
        raise ScenarioError("workspace must be a non-degenerate box [lo, hi] of the scenario dimension")
    if sc.dt <= 0 or sc.max_steps < 0:
        raise ScenarioError("dt must be positive and max_steps non-negative")
    if not 0.0 < sc.delta < 0.75:
        raise ScenarioError(f"delta must lie in (0, 0.75), got {sc.delta}")
    if sc.method not in ("buavc", "bvc"):
        raise ScenarioError(f"unknown method {sc.method!r}")
    if sc.estimation.mode not in ("direct", "kf", "exact"):
        raise ScenarioError(f"unknown estimation mode {sc.estimation.mode!r}")
    f = sc.estimation.inflation_factor
    if f is not None and f < 1.0:
        raise ScenarioError("inflation_factor must be >= 1")
    if not sc.robots:
        raise ScenarioError("scenario has no robots")
    starts = []
    for i, r in enumerate(sc.robots):
        if r.dynamics not in DYNAMICS:
            raise ScenarioError(f"robot {i}: unknown dynamics {r.dynamics!r}")
        if r.dynamics == "diffdrive" and d != 2:
            raise ScenarioError(f"robot {i}: differential drive requires dimension 2")
        if r.dynamics == "mpc:quadrotor" and d != 3:
            raise ScenarioError(f"robot {i}: quadrotor requires dimension 3")
        s, g = np.asarray(r.start, float), np.asarray(r.goal, float)
        if s.shape != (d,) or g.shape != (d,):
            raise ScenarioError(f"robot {i}: start/goal must have {d} coordinates")
        if np.any(s < lo) or np.any(s > hi) or np.any(g < lo) or np.any(g > hi):
            raise ScenarioError(f"robot {i}: start or goal outside the workspace")
        if r.r_s <= 0 or r.v_max <= 0 or r.acc_max <= 0:
            raise ScenarioError(f"robot {i}: r_s, v_max and acc_max must be positive")
        for name in ("own_cov", "others_cov"):
            C = getattr(r, name)
            if C is None:
                continue
            C = np.asarray(C, float)
            if C.shape != (d, d):
                raise ScenarioError(f"robot {i}: {name} must be {d}x{d}")
        starts.append((s, r.r_s))
    for i in range(len(starts)):
        for j in range(i + 1, len(starts)):
            if np.linalg.norm(starts[i][0] - starts[j][0]) < starts[i][1] + starts[j][1]:
                raise ScenarioError(f"robots {i} and {j} start closer than their combined radii")
    for k, o in enumerate(sc.obstacles):
        V = np.asarray(o.vertices, float)
        if V.ndim != 2 or V.shape[1] != d or V.shape[0] < d + 1:
            raise ScenarioError(f"obstacle {k}: need at least {d + 1} vertices of dimension {d}")
        if np.asarray(o.translation_cov, float).shape != (d, d):
            raise ScenarioError(f"obstacle {k}: translation_cov must be {d}x{d}")
