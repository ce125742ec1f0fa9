"""Run metrics, computed both while streaming and from recorded steps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

ACTIVE, ARRIVED, COLLIDED = "active", "arrived", "collided"


def dist(p, q) -> float:
    s = 0.0
    for a, b in zip(p, q):
        s += (float(a) - float(b)) ** 2
    return math.sqrt(s)


@dataclass(frozen=True, eq=False)
class StepRecord:
    step: int
    true_pos: np.ndarray  # (n, d)
    est_mean: np.ndarray  # (n, d)
    cov_diag: np.ndarray  # (n, d)
    command: np.ndarray  # (n, 3): velocity/acceleration components or (v, omega, nan)
    face_count: np.ndarray  # (n,)
    cell_empty: np.ndarray  # (n,) bool
    mode: tuple
    status: tuple
    obstacle_clearance: np.ndarray  # (n,) true distance to nearest true obstacle, inf if none
    target_in_cell: np.ndarray = field(default=None)  # (n,) bool, commanded target inside cell
    predicted_in_cell: np.ndarray = field(default=None)  # (n,) bool, predicted next mean inside cell
    fallback: np.ndarray = field(default=None)  # (n,) bool, MPC braking fallback used


@dataclass(frozen=True)
class Metrics:
    collision_rate: float
    min_inter_robot_distance: Optional[float]
    min_robot_obstacle_distance: Optional[float]
    avg_travelled_distance: Optional[float]
    completion_time: Optional[float]
    deadlock_count: int
    empty_cell_steps: int
    n_robots: int = 0
    n_arrived: int = 0
    n_collided: int = 0
    steps: int = 0
    min_inter_robot_distance_all: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


class MetricsAccumulator:
    """Streaming metrics; distance and time quantities use arrived robots only."""

    def __init__(self, n: int, dt: float):
        self.n, self.dt = n, dt
        self.prev = None
        self.travel = [0.0] * n
        self.min_to_other = [math.inf] * n
        self.min_to_obstacle = [math.inf] * n
        self.arrive_step = [None] * n
        self.status = [ACTIVE] * n
        self.empty_steps = 0
        self.last_step = 0

    def update(self, rec: StepRecord):
        n = self.n
        P = rec.true_pos
        if self.prev is not None:
            for i in range(n):
                self.travel[i] += dist(P[i], self.prev[i])
        for i in range(n):
            for j in range(i + 1, n):
                dij = dist(P[i], P[j])
                if dij < self.min_to_other[i]:
                    self.min_to_other[i] = dij
                if dij < self.min_to_other[j]:
                    self.min_to_other[j] = dij
            c = float(rec.obstacle_clearance[i])
            if c < self.min_to_obstacle[i]:
                self.min_to_obstacle[i] = c
            if rec.status[i] == ARRIVED and self.arrive_step[i] is None:
                self.arrive_step[i] = rec.step
            if rec.cell_empty[i]:
                self.empty_steps += 1
        self.status = list(rec.status)
        self.last_step = rec.step
        self.prev = P

    def finalize(self) -> Metrics:
        ok = [i for i in range(self.n) if self.status[i] == ARRIVED]
        n_col = sum(1 for s in self.status if s == COLLIDED)
        n_dead = sum(1 for s in self.status if s == ACTIVE)
        if ok:
            mind = min(self.min_to_other[i] for i in ok)
            mino = min(self.min_to_obstacle[i] for i in ok)
            travel = math.fsum(self.travel[i] for i in ok) / len(ok)
            done = max(self.arrive_step[i] for i in ok) * self.dt
        else:
            mind = mino = travel = done = None
        fin = lambda x: None if x is None or not math.isfinite(x) else float(x)
        all_min = min(self.min_to_other) if self.n > 1 else None
        return Metrics(n_col / self.n, fin(mind), fin(mino), fin(travel), fin(done), n_dead, self.empty_steps,
                       self.n, len(ok), n_col, self.last_step, fin(all_min))


def metrics_from_records(records: Sequence[StepRecord], dt: float) -> Metrics:
    """Recompute metrics from a full record stream (array formulation)."""
    P = np.stack([r.true_pos for r in records])  # (T, n, d)
    T, n, _ = P.shape
    travel = np.zeros(n)
    steps = np.zeros((T - 1, n)) if T > 1 else np.zeros((0, n))
    for t in range(1, T):
        for i in range(n):
            steps[t - 1, i] = dist(P[t, i], P[t - 1, i])
    for i in range(n):
        travel[i] = 0.0
        acc = 0.0
        for t in range(T - 1):
            acc += steps[t, i]
        travel[i] = acc
    pair = np.full((T, n, n), np.inf)
    for t in range(T):
        for i in range(n):
            for j in range(i + 1, n):
                pair[t, i, j] = pair[t, j, i] = dist(P[t, i], P[t, j])
    min_other = pair.min(axis=(0, 2)) if n > 1 else np.full(n, np.inf)
    clear = np.stack([r.obstacle_clearance for r in records]).min(axis=0)
    final = records[-1].status
    status_mat = np.array([list(r.status) for r in records])
    ok = [i for i in range(n) if final[i] == ARRIVED]
    arrive = {i: int(records[int(np.argmax(status_mat[:, i] == ARRIVED))].step) for i in ok}
    empty = int(sum(int(np.count_nonzero(r.cell_empty)) for r in records))
    n_col = sum(1 for s in final if s == COLLIDED)
    n_dead = sum(1 for s in final if s == ACTIVE)
    fin = lambda x: None if x is None or not math.isfinite(x) else float(x)
    if ok:
        out = (float(min_other[ok].min()), float(clear[ok].min()),
               math.fsum(travel[i] for i in ok) / len(ok), max(arrive.values()) * dt)
    else:
        out = (None, None, None, None)
    all_min = float(min_other.min()) if n > 1 else None
    return Metrics(n_col / n, fin(out[0]), fin(out[1]), fin(out[2]), fin(out[3]), n_dead, empty, n, len(ok), n_col,
                   int(records[-1].step), fin(all_min))
