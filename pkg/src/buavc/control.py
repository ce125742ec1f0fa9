"""Reactive one-step controllers inside a cell and the deadlock heuristics."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cells import BUAVC
from .geometry import clip_line, project_point

NORMAL = "normal"
EDGE_FOLLOW = "edge-follow"
ROTATED_GOAL = "rotated-goal"


@dataclass(frozen=True)
class ControlCommand:
    kind: str  # "velocity" | "acceleration" | "unicycle"
    vector: Optional[np.ndarray] = None
    v: float = 0.0
    omega: float = 0.0
    target: Optional[np.ndarray] = None

    @classmethod
    def velocity(cls, u, target=None):
        return cls("velocity", np.asarray(u, dtype=float), target=target)

    @classmethod
    def acceleration(cls, u, target=None):
        return cls("acceleration", np.asarray(u, dtype=float), target=target)

    @classmethod
    def unicycle(cls, v, omega, target=None):
        return cls("unicycle", None, float(v), float(omega), target=target)

    def fields(self, d: int) -> list:
        """Flat (u_x, u_y, u_z) or (v, omega, nan) view used in trajectory tables."""
        if self.kind == "unicycle":
            return [self.v, self.omega, math.nan]
        out = list(self.vector) + [math.nan] * (3 - d)
        return out


def _unit(x):
    n = float(np.linalg.norm(x))
    return (x / n, n) if n > 1e-9 else (np.zeros_like(x), 0.0)


def single_integrator_control(p_hat, goal, cell: BUAVC, v_max: float, dt: float) -> ControlCommand:
    p_hat = np.asarray(p_hat, dtype=float)
    if cell.empty:
        return ControlCommand.velocity(np.zeros_like(p_hat))
    g_star = project_point(cell.polytope, goal, start=cell.chebyshev.center)
    direction, dist = _unit(g_star - p_hat)
    speed = min(v_max, dist / dt)
    return ControlCommand.velocity(speed * direction, target=g_star)


def braking(v, acc_max: float, dt: float) -> np.ndarray:
    direction, speed = _unit(np.asarray(v, dtype=float))
    # never reverse within one step
    return -min(acc_max, speed / dt) * direction


def double_integrator_control(p_hat, v, goal, cell: BUAVC, acc_max: float, dt: float = 0.1,
                              v_max: Optional[float] = None, law: str = "tracking") -> ControlCommand:
    """Acceleration toward the projected goal.

    ``law="literal"`` is full acceleration along ``g* - p_hat``. The default
    ``"tracking"`` saturates ``(v_ref - v)/dt`` at ``acc_max`` where ``v_ref``
    points at ``g*`` with a speed that can still stop there; from rest and far
    from the goal both laws coincide.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    v = np.asarray(v, dtype=float)
    if cell.empty:
        return ControlCommand.acceleration(braking(v, acc_max, dt))
    g_star = project_point(cell.polytope, goal, start=cell.chebyshev.center)
    direction, dist = _unit(g_star - p_hat)
    if law == "literal":
        return ControlCommand.acceleration(acc_max * direction, target=g_star)
    if law != "tracking":
        raise ValueError(f"unknown double-integrator law {law!r}")
    speed = min(math.sqrt(2.0 * acc_max * dist), dist / dt)
    if v_max is not None:
        speed = min(speed, v_max)
    u = (speed * direction - v) / dt
    n = float(np.linalg.norm(u))
    if n > acc_max:
        u *= acc_max / n
    return ControlCommand.acceleration(u, target=g_star)


def _closest_on_segment(seg, goal):
    return None if seg is None else seg.closest_point(goal)


def differential_drive_control(p_hat, theta: float, goal, cell: BUAVC, k: float = 1.0, v_max: float = np.inf,
                               omega_max: float = np.inf, allow_reverse: bool = False) -> ControlCommand:
    """Unicycle law driving along the heading line and steering toward the goal line.

    The steering angle uses the two-argument arctangent of the bearing to
    ``(g* + g*_w)/2`` so that targets behind the robot turn it around.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    goal = np.asarray(goal, dtype=float)
    h = np.array([math.cos(theta), math.sin(theta)])
    hp = np.array([-h[1], h[0]])
    if cell.empty:
        return ControlCommand.unicycle(0.0, 0.0)
    P = cell.polytope
    g_star = project_point(P, goal, start=cell.chebyshev.center)
    g_v = _closest_on_segment(clip_line(P, p_hat, h), goal)
    to_goal = goal - p_hat
    g_w = None
    if np.linalg.norm(to_goal) > 1e-9:
        g_w = _closest_on_segment(clip_line(P, p_hat, to_goal), goal)
    v = 0.0 if g_v is None else k * float(h @ (g_v - p_hat))
    if not allow_reverse:
        v = max(v, 0.0)
    v = float(np.clip(v, -v_max, v_max))
    m = g_star if g_w is None else 0.5 * (g_star + g_w)
    if g_v is None:
        m = goal
    rel = m - p_hat
    if np.linalg.norm(rel) <= 1e-9:
        omega = 0.0
    else:
        omega = k * math.atan2(float(hp @ rel), float(h @ rel))
    omega = float(np.clip(omega, -omega_max, omega_max))
    return ControlCommand.unicycle(v, omega, target=g_star)


@dataclass
class DeadlockState:
    n_dead: int = 20
    dp_min: float = 0.05
    resolution: str = EDGE_FOLLOW
    mode: str = NORMAL
    window: deque = field(default_factory=deque)

    def __post_init__(self):
        self.window = deque(self.window, maxlen=self.n_dead)

    @property
    def deadlocked(self) -> bool:
        return self.mode != NORMAL


def deadlock_step(state: DeadlockState, progress: float, at_goal: bool) -> str:
    """Push one step's displacement and update the mode (with 2x hysteresis on exit)."""
    state.window.append(float(progress))
    total = math.fsum(state.window)
    if at_goal:
        state.mode = NORMAL
    elif state.mode == NORMAL:
        if len(state.window) == state.n_dead and total <= state.dp_min:
            state.mode = state.resolution
    elif total > 2.0 * state.dp_min:
        state.mode = NORMAL
    return state.mode


def _tangent(a: np.ndarray, ccw: bool = True) -> np.ndarray:
    if a.shape[0] == 2:
        t = np.array([-a[1], a[0]])
    else:
        axis = np.array([0.0, 0.0, 1.0])
        if abs(a @ axis) > 0.99:
            axis = np.array([1.0, 0.0, 0.0])
        t = np.cross(axis, a)
        t /= np.linalg.norm(t)
    return t if ccw else -t


def resolve_deadlock_one_step(cell: BUAVC, p_hat, goal, robot_id: int = 0, step: float = 1.0,
                              tie_break: str = "uniform") -> Optional[np.ndarray]:
    """Temporary target sliding along the face that blocks the goal.

    The slide follows the in-face component of the goal direction. When that
    component vanishes (symmetric deadlock) the face normal is rotated
    counterclockwise; ``tie_break="parity"`` instead rotates clockwise for odd
    ids. Returns None for an empty cell.
    """
    if cell.empty:
        return None
    goal = np.asarray(goal, dtype=float)
    P = cell.polytope
    g_star = project_point(P, goal, start=cell.chebyshev.center)
    active = np.where(P.A @ g_star >= P.b - 1e-7)[0]
    if active.size == 0:
        return goal.copy()
    w = goal - g_star
    l = int(active[np.argmax(P.A[active] @ w)])
    a = P.A[l]
    w_t = w - a * float(a @ w)
    if np.linalg.norm(w_t) > 1e-6:
        direction = w_t / np.linalg.norm(w_t)
        # quantize to the face tangent so 2D targets stay exactly on the face
        t = _tangent(a)
        if a.shape[0] == 2:
            direction = t if t @ w_t > 0 else -t
    else:
        ccw = True if tie_break == "uniform" else (int(robot_id) % 2 == 0)
        direction = _tangent(a, ccw)
    return g_star + step * direction


def rotation_z_cw(d: int) -> np.ndarray:
    R = np.array([[0.0, 1.0], [-1.0, 0.0]])
    if d == 3:
        R = np.block([[R, np.zeros((2, 1))], [np.zeros((1, 2)), np.ones((1, 1))]])
    return R


def resolve_deadlock_rotate_goal(p_hat, goal) -> np.ndarray:
    p_hat = np.asarray(p_hat, dtype=float)
    goal = np.asarray(goal, dtype=float)
    return rotation_z_cw(p_hat.shape[0]) @ (goal - p_hat) + p_hat
