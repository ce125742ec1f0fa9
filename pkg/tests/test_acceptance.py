"""End-to-end acceptance checks, one per criterion.

Each check prints ``criterion N: PASS|FAIL <detail>``. Run under pytest, or
directly with ``python3 tests/test_acceptance.py [N ...]``.
"""

import math
import os
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from buavc.geometry import VPolytope
from buavc.mathkit import chi2_inv_cdf, make_rng
from buavc.mpc import QuadrotorParams, quadrotor, rk4_step
from buavc.separators import GaussianPosition, UncertainObstacle, best_linear_separator, misclassification
from buavc.sim import (
    EstimationParams,
    ObstacleSpec,
    RobotSpec,
    Scenario,
    gen_antipodal_circle,
    gen_asymmetric_swap,
    gen_random_moving,
    run,
)
from buavc.sim import montecarlo as mc
from buavc.sim.io import trajectory_csv

S1 = ((0.04 ** 2, 0.0), (0.0, 0.04 ** 2))
S2 = ((0.06 ** 2, 0.0), (0.0, 0.06 ** 2))


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


# --- 1 ------------------------------------------------------------------------------

def criterion_1():
    rng = make_rng(1, 1)
    worst = 0.0
    with Timer() as t:
        for _ in range(100):
            d = int(rng.choice([2, 3]))
            s = rng.uniform(0.02, 0.5) ** 2 * np.eye(d)
            pi, pj = rng.uniform(-3, 3, d), rng.uniform(-3, 3, d)
            h = best_linear_separator(GaussianPosition(pi, s), GaussianPosition(pj, s))
            a = (pj - pi) / np.linalg.norm(pj - pi)
            b = a @ (pi + pj) / 2
            worst = max(worst, np.linalg.norm(h.a - a), abs(h.b - b))
    ok = worst <= 1e-9 and t.s < 1.0
    return ok, f"max deviation from midplane {worst:.2e} (tol 1e-9), {t.s:.2f} s (< 1 s)"


# --- 2 ------------------------------------------------------------------------------

def criterion_2():
    rng = make_rng(1, 2)
    gap, du = -np.inf, 0.0
    with Timer() as t:
        for _ in range(100):
            gi = GaussianPosition(rng.uniform(-2, 2, 2), mc.random_spd(rng, 2, 0.05, 1.0))
            gj = GaussianPosition(gi.mean + rng.uniform(0.3, 3, 2) * rng.choice([-1, 1], 2),
                                  mc.random_spd(rng, 2, 0.05, 1.0))
            h = best_linear_separator(gi, gj)
            p1, p2, u1, u2 = misclassification(h, gi, gj)
            oracle, _ = mc.grid_minimax(gi, gj, n_angles=20000)
            gap = max(gap, max(p1, p2) - oracle)
            du = max(du, abs(u1 - u2))
    ok = gap <= 1e-4 and du <= 1e-8 and t.s < 30
    return ok, f"max(ours - grid) {gap:.2e} (<= 1e-4), max |u1-u2| {du:.1e} (<= 1e-8), {t.s:.1f} s (< 30 s)"


# --- 3 ------------------------------------------------------------------------------

def criterion_3():
    rng = make_rng(1, 3)
    parts, ok = [], True
    with Timer() as t:
        for d in (2, 3):
            for eps in (0.05, 0.1):
                r = mc.lemma1(eps, d, 10 ** 6, rng, cov=mc.random_spd(rng, d), tol=0.002)
                ok &= r.passed
                parts.append(f"d={d} eps={eps}: {r.empirical:.4f}")
            for delta in (0.03, 0.1):
                lo = rng.uniform(-1, 0, d)
                obs = UncertainObstacle(VPolytope.box(lo, lo + rng.uniform(0.3, 1.0, d)), mc.random_spd(rng, d))
                r = mc.shadow_containment(obs, delta, 10 ** 6, rng)
                ok &= r.empirical >= r.bound
                parts.append(f"d={d} containment {r.empirical:.4f} >= {r.bound:.4f}")
    ok &= t.s < 30
    return ok, "; ".join(parts) + f"; {t.s:.1f} s (< 30 s)"


# --- 4 ------------------------------------------------------------------------------

def _random_pair(rng, delta):
    d = int(rng.choice([2, 3]))
    gi = GaussianPosition(rng.uniform(-1, 1, d), mc.random_spd(rng, d, 0.02, 0.15))
    u = rng.standard_normal(d)
    gj = GaussianPosition(gi.mean + rng.uniform(1.0, 2.0) * u / np.linalg.norm(u), mc.random_spd(rng, d, 0.02, 0.15))
    return mc.PairConfig(gi, gj, 0.2, delta)


def _random_obstacle(rng, delta):
    d = int(rng.choice([2, 3]))
    if d == 2:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 6))
        body = VPolytope.from_points(np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(0.3, 0.8))
    else:
        body = VPolytope.box(-rng.uniform(0.2, 0.6, 3), rng.uniform(0.2, 0.6, 3))
    g = GaussianPosition(-rng.uniform(1.8, 2.5) * np.eye(d)[0] + rng.uniform(-0.3, 0.3, d),
                         mc.random_spd(rng, d, 0.02, 0.15))
    return mc.ObstacleConfig(g, UncertainObstacle(body, mc.random_spd(rng, d, 0.02, 0.1)), 0.2, delta)


def criterion_4():
    rng = make_rng(1, 4)
    worst, ratio, fails, n = -np.inf, 0.0, [], 0
    with Timer() as t:
        for delta in (0.03, 0.05, 0.1):
            for k in range(20):
                for cfg in (_random_pair(rng, delta), _random_obstacle(rng, delta)):
                    r = mc.mc_verify_theorem(cfg, 10 ** 6, rng)
                    n += 1
                    worst = max(worst, (r.empirical - delta) / r.margin * 3)
                    ratio = max(ratio, r.empirical / delta)
                    if not r.passed:
                        fails.append(r.line())
    ok = not fails and t.s < 300
    return ok, (f"{n} configurations (20 pair + 20 obstacle per delta), largest empirical/delta {ratio:.3f}; "
                f"empirical - delta at most {worst:.1f} binomial sigma (<= 3), {t.s:.0f} s (< 300 s)" + ("; " + " | ".join(fails) if fails else ""))


# --- 5 ------------------------------------------------------------------------------

def criterion_5():
    bad = []
    with Timer() as t:
        for n in (2, 4, 8):
            for seed in range(10):
                m = run(replace(gen_antipodal_circle(n, 4.0), seed=seed), keep_records=False).metrics
                if m.collision_rate != 0 or m.deadlock_count != 0 or m.n_arrived != n:
                    bad.append((n, seed, m.collision_rate, m.deadlock_count))
    ok = not bad and t.s < 120
    return ok, f"30 runs, failures {bad}, {t.s:.0f} s (< 120 s)"


# --- 6 / 7 --------------------------------------------------------------------------

_cache = {}


def _batch(key, make):
    if key not in _cache:
        _cache[key] = [run(make(s), keep_records=False).metrics for s in range(10)]
    return _cache[key]


def criterion_6():
    with Timer() as t:
        lo = _batch("swap16-0.05", lambda s: gen_asymmetric_swap(16, s, Scenario(delta=0.05)))
        hi = _batch("swap16-0.3", lambda s: gen_asymmetric_swap(16, s, Scenario(delta=0.3)))
    c_lo = np.mean([m.collision_rate for m in lo])
    c_hi = np.mean([m.collision_rate for m in hi])
    d_lo = np.mean([m.min_inter_robot_distance_all for m in lo])
    d_hi = np.mean([m.min_inter_robot_distance_all for m in hi])
    ok = c_hi >= c_lo and d_lo >= d_hi
    return ok, (f"collision rate {c_lo:.3f} (delta 0.05) vs {c_hi:.3f} (delta 0.3); "
                f"mean min distance {d_lo:.3f} vs {d_hi:.3f} m; {t.s:.0f} s")


def _circle16(method, delta):
    spec = RobotSpec((0.0, 0.0), (0.0, 0.0), own_cov=S2, others_cov=S2)
    base = Scenario(delta=delta, method=method, bvc_inflation=0.1, robots=(spec,))
    return lambda s: replace(gen_antipodal_circle(16, 4.0, base), seed=s)


def criterion_7():
    with Timer() as t:
        bvc = _batch("circle16-bvc", _circle16("bvc", 0.05))
        ours = _batch("circle16-buavc", _circle16("buavc", 0.05))
    c_bvc = np.mean([m.collision_rate for m in bvc])
    c_ours = np.mean([m.collision_rate for m in ours])
    ok = c_bvc > 0 and c_ours == 0
    return ok, f"BVC+10% collision rate {c_bvc:.3f} (> 0), B-UAVC delta 0.05 {c_ours:.3f} (= 0); {t.s:.0f} s"


# --- 8 ------------------------------------------------------------------------------

def criterion_8():
    base = Scenario(stopping_buffer=True, robots=(RobotSpec((0.0, 0.0), (0.0, 0.0), dynamics="double"),))
    collisions, outside, pred_out, total = 0, 0, 0, 0
    with Timer() as t:
        for seed in range(10):
            res = run(replace(gen_antipodal_circle(4, 4.0, base), seed=seed))
            collisions += res.metrics.n_collided
            for r in res.records[1:]:
                act = ~r.cell_empty & np.isfinite(r.command[:, 0])
                total += int(act.sum())
                outside += int((~r.target_in_cell & act).sum())
                pred_out += int((~r.predicted_in_cell & act).sum())
    ok = collisions == 0 and outside == 0
    return ok, (f"collided robots {collisions}, commanded targets outside cell {outside}/{total} (tol 1e-6); "
                f"informational: predicted next mean outside cell {pred_out}/{total}; {t.s:.0f} s")


# --- 9 ------------------------------------------------------------------------------

def _box(cx, cy, w, h):
    v = ((cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2), (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2))
    return ObstacleSpec(v, ((0.02 ** 2, 0.0), (0.0, 0.02 ** 2)))


def diffdrive_scenario(seed):
    robots = (RobotSpec((-2.5, 0.0), (2.5, 0.0), dynamics="diffdrive", r_s=0.3, theta0=0.0),
              RobotSpec((2.5, 0.0), (-2.5, 0.0), dynamics="diffdrive", r_s=0.3, theta0=math.pi))
    return Scenario(delta=0.03, seed=seed, workspace=((-3.5, -3.5), (3.5, 3.5)), robots=robots,
                    obstacles=(_box(0.0, 1.45, 0.8, 0.8), _box(0.0, -1.45, 0.8, 0.8)))


def criterion_9():
    dmin, omin, arrived = np.inf, np.inf, 0
    with Timer() as t:
        for seed in range(4):
            res = run(diffdrive_scenario(seed))
            dmin = min(dmin, res.metrics.min_inter_robot_distance_all)
            omin = min(omin, min(float(r.obstacle_clearance.min()) for r in res.records))
            arrived += res.metrics.n_arrived
    ok = dmin >= 0.6 and omin >= 0.3
    return ok, (f"min robot-robot {dmin:.3f} m (>= 0.6), min robot-obstacle {omin:.3f} m (>= 0.3), "
                f"arrived {arrived}/8; {t.s:.0f} s")


# --- 10 -----------------------------------------------------------------------------

def quadrotor_scenario(seed):
    S = tuple(map(tuple, 0.04 ** 2 * np.eye(3)))
    spec = RobotSpec((0.0, 0.0, 1.5), (0.0, 0.0, 1.5), dynamics="mpc:quadrotor", r_s=0.3, own_cov=S, others_cov=S)
    base = Scenario(dimension=3, workspace=((-4.0, -4.0, 0.0), (4.0, 4.0, 3.0)), dt=0.05, max_steps=1200,
                    delta=0.03, robots=(spec,))
    sc = replace(gen_antipodal_circle(6, 3.0, base), seed=seed)
    assert sc.mpc.N == 20 and sc.mpc.dt == 0.05
    return sc


def criterion_10():
    cols, dmins = 0, []
    with Timer() as t:
        for seed in range(3):
            m = run(quadrotor_scenario(seed), keep_records=False).metrics
            cols += m.n_collided
            dmins.append(m.min_inter_robot_distance_all)
    ok = cols == 0 and min(dmins) >= 0.6 and t.s < 600
    return ok, (f"collided {cols}, min distance per seed {[round(x, 3) for x in dmins]} m (>= 0.6; "
                f"mean {np.mean(dmins):.3f}), {t.s:.0f} s (< 600 s)")


# --- 11 -----------------------------------------------------------------------------

def criterion_11():
    c = chi2_inv_cdf(0.95, 2)
    quad = quadrotor()
    x = np.array([0.5, -1.0, 1.2, 0, 0, 0, 0, 0, 0.3])
    hover = np.max(np.abs(rk4_step(quad, x, np.zeros(4), 0.05) - x))
    y = np.zeros(9)
    y[3] = 1.0
    k = QuadrotorParams().k_Dx
    drag = 0.0
    for i in range(1, 41):
        y = rk4_step(quad, y, np.zeros(4), 0.05)
        drag = max(drag, abs(y[3] - math.exp(-k * 0.05 * i)))
    ok = abs(c - 5.9914645471) <= 1e-6 and hover <= 1e-12 and drag <= 1e-8
    return ok, f"chi2_inv(0.95, 2) = {c:.10f}, hover drift {hover:.1e}, drag error {drag:.1e}"


# --- 12 -----------------------------------------------------------------------------

def criterion_12():
    scs = [
        gen_asymmetric_swap(6, 3, Scenario(max_steps=200)),
        replace(gen_random_moving(4, 0.1, 2, Scenario(max_steps=200)), estimation=EstimationParams(mode="kf")),
        diffdrive_scenario(1),
        replace(gen_antipodal_circle(3, 3.0, Scenario(max_steps=60, robots=(RobotSpec((0, 0), (0, 0),
                                                                                      dynamics="mpc:double"),))),
                seed=9),
    ]
    same = [trajectory_csv(run(sc).records).encode() == trajectory_csv(run(sc).records).encode() for sc in scs]
    return all(same), f"byte-identical trajectories for {sum(same)}/{len(same)} scenarios"


# --- harness ------------------------------------------------------------------------

CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 13)}


def evaluate(k):
    ok, detail = CRITERIA[k]()
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    return ok, line


@pytest.mark.parametrize("k", list(CRITERIA))
def test_criterion(k):
    from conftest import ACCEPTANCE_LINES

    ok, line = evaluate(k)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


if __name__ == "__main__":
    ks = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    results = [evaluate(k)[0] for k in ks]
    sys.exit(0 if all(results) else 1)
