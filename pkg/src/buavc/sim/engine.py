"""Synchronous multi-robot simulation loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional

import numpy as np

from ..cells import BUAVC, CellOptions, RobotSnapshot, bvc_cell, build_buavc
from ..control import (
    EDGE_FOLLOW,
    NORMAL,
    ROTATED_GOAL,
    ControlCommand,
    DeadlockState,
    deadlock_step,
    differential_drive_control,
    double_integrator_control,
    resolve_deadlock_one_step,
    resolve_deadlock_rotate_goal,
    single_integrator_control,
)
from ..estimation import FilterState, InflationPolicy, inflate, kf_predict_update
from ..geometry import HPolytope, VPolytope, contains, distance_to_polytope
from ..mathkit import make_rng, sample_gaussian
from ..mpc import MPCConfig, PlannedTrajectory, double_integrator, plan, quadrotor, rk4_step, shift_warm_start
from ..separators import GaussianPosition, UncertainObstacle
from .metrics import ACTIVE, ARRIVED, COLLIDED, Metrics, MetricsAccumulator, StepRecord, dist
from .scenario import Scenario, validate

MEAS_STREAM = 1
OBSTACLE_STREAM = 2


class SimulationBlowUp(ArithmeticError):
    pass


@dataclass
class RobotState:
    id: int
    dynamics: str
    p: np.ndarray
    v: np.ndarray
    theta: float = 0.0
    x: Optional[np.ndarray] = None  # full state for MPC robots
    status: str = ACTIVE
    deadlock: DeadlockState = field(default_factory=DeadlockState)
    temp_goal: Optional[np.ndarray] = None
    filt: Optional[FilterState] = None
    plan: Optional[PlannedTrajectory] = None
    rng: Optional[np.random.Generator] = None


class World:
    def __init__(self, sc: Scenario):
        validate(sc)
        self.sc = sc
        d = sc.dimension
        self.d = d
        self.workspace = HPolytope.box(sc.workspace[0], sc.workspace[1])
        self.obstacles = []
        self.true_obstacles = []
        for k, o in enumerate(sc.obstacles):
            V = VPolytope.from_points(o.vertices)
            cov = np.asarray(o.translation_cov, dtype=float)
            self.obstacles.append(UncertainObstacle(V, cov))
            shift = sample_gaussian(np.zeros(d), cov, make_rng(sc.seed, OBSTACLE_STREAM, k))
            self.true_obstacles.append(V.translated(shift))
        self.robots: List[RobotState] = []
        for i, r in enumerate(sc.robots):
            p = np.asarray(r.start, dtype=float)
            st = RobotState(i, r.dynamics, p.copy(), np.zeros(d), float(r.theta0),
                            deadlock=DeadlockState(sc.deadlock.n_dead, sc.deadlock.dp_min,
                                                   ROTATED_GOAL if r.dynamics.startswith("mpc") else EDGE_FOLLOW),
                            rng=make_rng(sc.seed, MEAS_STREAM, i))
            if dist(p, np.asarray(r.goal, dtype=float)) < sc.goal_tolerance:
                st.status = ARRIVED
            if r.dynamics == "mpc:quadrotor":
                st.x = np.concatenate([p, np.zeros(6)])
            if sc.estimation.mode == "kf":
                rm = sc.estimation.kf.r ** 2 * np.eye(d)
                st.filt = FilterState.initial(p, rm, sc.estimation.kf.q)
            self.robots.append(st)
        m = sc.mpc
        self.mpc_cfg = MPCConfig(N=m.N, dt=m.dt, R=None, Q_N=None, v_max=m.v_max)
        self.models = {}
        self.step_index = 0

    # -- per-robot pieces -------------------------------------------------

    def _model(self, spec):
        key = (spec.dynamics, spec.acc_max)
        if key not in self.models:
            if spec.dynamics == "mpc:double":
                self.models[key] = double_integrator(self.d, spec.acc_max, self.sc.dt)
            else:
                m = self.sc.mpc
                self.models[key] = quadrotor(max_tilt=m.max_tilt, max_vz=m.max_vz)
        return self.models[key]

    def _estimate(self, st: RobotState):
        spec = self.sc.robots[st.id]
        cov = np.asarray(spec.own_cov, dtype=float)
        mode = self.sc.estimation.mode
        if mode == "exact":
            return GaussianPosition(st.p.copy(), cov), st.v.copy()
        if mode == "direct":
            return GaussianPosition(sample_gaussian(st.p, cov, st.rng), cov), st.v.copy()
        z = sample_gaussian(st.p, st.filt.Rm, st.rng)
        st.filt, g = kf_predict_update(st.filt, z, self.sc.dt)
        return g, st.filt.velocity

    def _view_of_other(self, me_spec, other_est: GaussianPosition) -> GaussianPosition:
        f = self.sc.estimation.inflation_factor
        if f is not None:
            return inflate(other_est, InflationPolicy(f))
        if me_spec.others_cov is not None:
            return GaussianPosition(other_est.mean, np.asarray(me_spec.others_cov, dtype=float))
        return other_est

    def _cell(self, st: RobotState, est, vel, all_est) -> BUAVC:
        spec = self.sc.robots[st.id]
        ids = [j for j in range(len(self.robots)) if j != st.id]
        others = [self._view_of_other(spec, all_est[j]) for j in ids]
        stop = self.sc.stopping_buffer and spec.dynamics == "double"
        opts = CellOptions(self.workspace, spec.sensing_range, stop)
        me = RobotSnapshot(st.id, est, vel, spec.r_s, spec.acc_max)
        if self.sc.method == "bvc":
            return bvc_cell(me, [all_est[j] for j in ids], opts, self.sc.bvc_inflation, ids)
        return build_buavc(me, others, self.obstacles, self.sc.delta, opts, ids)

    def _goal(self, st: RobotState, cell: BUAVC, est) -> np.ndarray:
        spec = self.sc.robots[st.id]
        goal = np.asarray(spec.goal, dtype=float)
        mode = st.deadlock.mode
        if mode == EDGE_FOLLOW:
            tmp = resolve_deadlock_one_step(cell, est.mean, goal, st.id)
            return goal if tmp is None else tmp
        if mode == ROTATED_GOAL:
            if st.temp_goal is None:
                st.temp_goal = resolve_deadlock_rotate_goal(est.mean, goal)
            return st.temp_goal
        st.temp_goal = None
        return goal

    def _command(self, st: RobotState, cell: BUAVC, est, vel):
        spec = self.sc.robots[st.id]
        sc = self.sc
        goal = self._goal(st, cell, est)
        p_hat = est.mean
        kind = spec.dynamics
        if kind == "single":
            cmd = single_integrator_control(p_hat, goal, cell, spec.v_max, sc.dt)
            pred = p_hat + cmd.vector * sc.dt
        elif kind == "double":
            cmd = double_integrator_control(p_hat, vel, goal, cell, spec.acc_max, sc.dt, spec.v_max)
            pred = p_hat + vel * sc.dt + 0.5 * cmd.vector * sc.dt ** 2
        elif kind == "diffdrive":
            cmd = differential_drive_control(p_hat, st.theta, goal, cell, spec.k, spec.v_max, spec.omega_max)
            pred = p_hat + cmd.v * sc.dt * np.array([math.cos(st.theta), math.sin(st.theta)])
        else:
            model = self._model(spec)
            if kind == "mpc:double":
                x0 = np.concatenate([p_hat, vel])
            else:
                x0 = st.x.copy()
                x0[:3] = p_hat
            warm = shift_warm_start(st.plan) if st.plan is not None else None
            st.plan = plan(x0, goal, cell, model, self.mpc_cfg, warm)
            u = st.plan.inputs[0]
            cmd = ControlCommand("acceleration" if kind == "mpc:double" else "input", u,
                                 target=st.plan.states[0][: self.d])
            pred = st.plan.states[0][: self.d]
        return cmd, pred

    def _integrate(self, st: RobotState, cmd: ControlCommand):
        dt = self.sc.dt
        kind = st.dynamics
        if kind == "single":
            st.v = cmd.vector.copy()
            st.p = st.p + cmd.vector * dt
        elif kind in ("double", "mpc:double"):
            u = cmd.vector
            st.p = st.p + st.v * dt + 0.5 * u * dt * dt
            st.v = st.v + u * dt
        elif kind == "diffdrive":
            v, w, th = cmd.v, cmd.omega, st.theta
            if abs(w) > 1e-9:
                st.p = st.p + (v / w) * np.array([math.sin(th + w * dt) - math.sin(th),
                                                  -math.cos(th + w * dt) + math.cos(th)])
            else:
                st.p = st.p + v * dt * np.array([math.cos(th), math.sin(th)])
            st.theta = math.atan2(math.sin(th + w * dt), math.cos(th + w * dt))
            st.v = v * np.array([math.cos(st.theta), math.sin(st.theta)])
        else:
            model = self._model(self.sc.robots[st.id])
            h = self.mpc_cfg.dt
            n_sub = max(1, int(round(dt / h)))
            x = st.x
            for _ in range(n_sub):
                x = rk4_step(model, x, cmd.vector, dt / n_sub)
            st.x = x
            st.p = x[:3].copy()
            st.v = x[3:6].copy()
        if not np.all(np.isfinite(st.p)):
            raise SimulationBlowUp(f"robot {st.id} state is not finite at step {self.step_index}")

    def clearance(self, p) -> float:
        if not self.true_obstacles:
            return math.inf
        return min(distance_to_polytope(p, V) for V in self.true_obstacles)

    # -- the step ---------------------------------------------------------

    def initial_record(self) -> StepRecord:
        n, d = len(self.robots), self.d
        P = np.array([r.p for r in self.robots])
        return StepRecord(0, P, P.copy(), np.zeros((n, d)), np.full((n, 3), np.nan), np.zeros(n, dtype=int),
                          np.zeros(n, dtype=bool), tuple(NORMAL for _ in self.robots),
                          tuple(r.status for r in self.robots), np.array([self.clearance(p) for p in P]),
                          np.ones(n, dtype=bool), np.ones(n, dtype=bool), np.zeros(n, dtype=bool))

    def step(self) -> StepRecord:
        sc = self.sc
        n, d = len(self.robots), self.d
        self.step_index += 1
        # (1) estimates from the previous ground-truth snapshot
        ests, vels = [], []
        for st in self.robots:
            g, v = self._estimate(st)
            ests.append(g)
            vels.append(v)
        # (2) cells and (3) commands, all from the same snapshot
        cmds: List[Optional[ControlCommand]] = [None] * n
        faces = np.zeros(n, dtype=int)
        empty = np.zeros(n, dtype=bool)
        tin = np.ones(n, dtype=bool)
        pin = np.ones(n, dtype=bool)
        fb = np.zeros(n, dtype=bool)
        for st in self.robots:
            if st.status != ACTIVE:
                continue
            cell = self._cell(st, ests[st.id], vels[st.id], ests)
            faces[st.id] = cell.face_count
            empty[st.id] = cell.empty
            cmd, pred = self._command(st, cell, ests[st.id], vels[st.id])
            cmds[st.id] = cmd
            if not cell.empty:
                if cmd.target is not None:
                    tin[st.id] = contains(cell.polytope, cmd.target, 1e-6)
                pin[st.id] = contains(cell.polytope, pred, 1e-6)
            if st.plan is not None and st.dynamics.startswith("mpc"):
                fb[st.id] = st.plan.fallback
        # (4) ground truth integration
        prev = [st.p.copy() for st in self.robots]
        for st in self.robots:
            if cmds[st.id] is not None:
                self._integrate(st, cmds[st.id])
        # (5) bookkeeping on true positions
        newly = set()
        for i in range(n):
            ri = self.robots[i]
            for j in range(i + 1, n):
                rj = self.robots[j]
                if ri.status == ACTIVE or rj.status == ACTIVE:
                    if dist(ri.p, rj.p) < sc.robots[i].r_s + sc.robots[j].r_s:
                        newly.update((i, j))
        clear = np.array([self.clearance(st.p) for st in self.robots])
        for st in self.robots:
            if st.status == ACTIVE and clear[st.id] < sc.robots[st.id].r_s:
                newly.add(st.id)
        for i in newly:
            self.robots[i].status = COLLIDED
            self.robots[i].v = np.zeros(d)
        for st in self.robots:
            if st.status != ACTIVE:
                continue
            goal = np.asarray(sc.robots[st.id].goal, dtype=float)
            at_goal = dist(st.p, goal) < sc.goal_tolerance
            if at_goal:
                st.status = ARRIVED
                st.v = np.zeros(d)
                if st.x is not None:
                    st.x[3:] = 0.0
            # signed reduction of the goal distance: the window sum telescopes to net
            # progress, so zero-mean estimation jitter does not mask a deadlock; with a
            # rotated goal, recovery is judged against the goal actually being pursued
            ref = st.temp_goal if st.temp_goal is not None else goal
            progress = dist(prev[st.id], ref) - dist(st.p, ref)
            deadlock_step(st.deadlock, progress, at_goal)
        cmd_rows = np.full((n, 3), np.nan)
        for i, c in enumerate(cmds):
            if c is not None:
                if c.kind == "input":
                    cmd_rows[i, : min(3, c.vector.shape[0])] = c.vector[:3]
                else:
                    cmd_rows[i] = c.fields(d)
        return StepRecord(self.step_index, np.array([st.p for st in self.robots]),
                          np.array([g.mean for g in ests]), np.array([np.diag(g.cov) for g in ests]), cmd_rows,
                          faces, empty, tuple(st.deadlock.mode for st in self.robots),
                          tuple(st.status for st in self.robots), clear, tin, pin, fb)

    def done(self) -> bool:
        return all(st.status != ACTIVE for st in self.robots)


@dataclass
class RunResult:
    metrics: Metrics
    records: list
    world: World


def iter_run(sc: Scenario) -> Iterator[StepRecord]:
    w = World(sc)
    yield w.initial_record()
    while w.step_index < sc.max_steps and not w.done():
        yield w.step()


def run(sc: Scenario, keep_records: bool = True, on_record: Optional[Callable] = None) -> RunResult:
    w = World(sc)
    acc = MetricsAccumulator(len(w.robots), sc.dt)
    records = []
    rec = w.initial_record()
    while True:
        acc.update(rec)
        if on_record is not None:
            on_record(rec)
        if keep_records:
            records.append(rec)
        if w.step_index >= sc.max_steps or w.done():
            break
        rec = w.step()
    return RunResult(acc.finalize(), records, w)
