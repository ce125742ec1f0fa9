"""Scenario families: antipodal circle, sector swap and random obstacle fields."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..mathkit import make_rng
from .scenario import ObstacleSpec, RobotSpec, Scenario, ScenarioError

_GEN_STREAM = 7919


class SamplingExhaustedError(RuntimeError):
    pass


def _template(base: Scenario) -> RobotSpec:
    return base.robots[0] if base.robots else RobotSpec(start=(0.0, 0.0), goal=(0.0, 0.0))


def _tup(x) -> tuple:
    # snap trig round-off (e.g. cos(pi/2)) so documents read cleanly
    return tuple(0.0 if abs(float(v)) < 1e-12 else float(v) for v in x)


def gen_antipodal_circle(n: int, radius: float, base: Scenario = Scenario(), heights=None) -> Scenario:
    """Robots equally spaced on a circle, each heading to its antipode.

    For 3D scenarios ``heights`` gives a per-robot z (cycled), default mid-workspace.
    """
    if n < 2:
        raise ScenarioError("need at least two robots")
    tpl = _template(base)
    d = base.dimension
    lo, hi = np.asarray(base.workspace[0], float), np.asarray(base.workspace[1], float)
    if radius <= 0 or np.any(lo[:2] > -radius) or np.any(hi[:2] < radius):
        raise ScenarioError("circle does not fit the workspace")
    chord = 2.0 * radius * math.sin(math.pi / n)
    if chord < 2.0 * tpl.r_s:
        raise ScenarioError(f"adjacent starts {chord:.3f} m apart, below 2*r_s")
    robots = []
    for k in range(n):
        a = 2.0 * math.pi * k / n
        s = [radius * math.cos(a), radius * math.sin(a)]
        g = [radius * math.cos(a + math.pi), radius * math.sin(a + math.pi)]
        if d == 3:
            z = 0.5 * (lo[2] + hi[2]) if heights is None else heights[k % len(heights)]
            s.append(z)
            g.append(z)
        robots.append(replace(tpl, start=_tup(s), goal=_tup(g), theta0=float(a + math.pi)))
    return base.with_robots(robots)


def _sector_point(rng, k, n, r_lo, r_hi):
    a = 2.0 * math.pi * (k + rng.uniform()) / n
    r = math.sqrt(rng.uniform(r_lo ** 2, r_hi ** 2))
    return np.array([r * math.cos(a), r * math.sin(a)])


def gen_asymmetric_swap(n: int, seed: int, base: Scenario = Scenario(), r_min: float = 2.0,
                        r_max: float = 4.5, max_tries: int = 10_000) -> Scenario:
    """Random start in sector k, random goal in sector (k + n//2) mod n."""
    if n < 2:
        raise ScenarioError("need at least two robots")
    tpl = _template(base)
    rng = make_rng(seed, _GEN_STREAM, 1)
    tries = 0
    starts, goals = [], []
    for k in range(n):
        for sector, pts in ((k, starts), ((k + n // 2) % n, goals)):
            while True:
                tries += 1
                if tries > max_tries:
                    raise SamplingExhaustedError("could not place robots with the required spacing")
                p = _sector_point(rng, sector, n, r_min, r_max)
                if all(np.linalg.norm(p - q) >= 2.0 * tpl.r_s + 0.05 for q in pts):
                    pts.append(p)
                    break
    robots = [replace(tpl, start=_tup(s), goal=_tup(g), theta0=math.atan2(g[1] - s[1], g[0] - s[0]))
              for s, g in zip(starts, goals)]
    return replace(base.with_robots(robots), seed=seed)


def _box_vertices(lo, hi) -> tuple:
    return (_tup((lo[0], lo[1])), _tup((hi[0], lo[1])), _tup((hi[0], hi[1])), _tup((lo[0], hi[1])))


def gen_random_moving(n: int, obstacle_density: float, seed: int, base: Scenario = Scenario(),
                      n_obstacles: int = 0, obstacle_cov=((0.02 ** 2, 0.0), (0.0, 0.02 ** 2)),
                      max_tries: int = 10_000) -> Scenario:
    """Random starts/goals among axis-aligned boxes covering ``obstacle_density`` of the area."""
    if not 0.0 <= obstacle_density <= 0.3:
        raise ScenarioError("density must lie in [0, 0.3]")
    if base.dimension != 2:
        raise ScenarioError("random obstacle fields are 2D")
    tpl = _template(base)
    rng = make_rng(seed, _GEN_STREAM, 2)
    lo, hi = np.asarray(base.workspace[0], float), np.asarray(base.workspace[1], float)
    area = float(np.prod(hi - lo))
    boxes = []
    if obstacle_density > 0:
        m = n_obstacles or max(1, int(round(obstacle_density * area / 1.0)))
        each = obstacle_density * area / m
        tries = 0
        while len(boxes) < m:
            tries += 1
            if tries > max_tries:
                raise SamplingExhaustedError("could not place obstacles")
            aspect = rng.uniform(0.5, 2.0)
            w = math.sqrt(each * aspect)
            h = each / w
            c = rng.uniform(lo + [w / 2 + 0.5, h / 2 + 0.5], hi - [w / 2 + 0.5, h / 2 + 0.5])
            blo, bhi = c - [w / 2, h / 2], c + [w / 2, h / 2]
            if all(np.any(blo > q_hi + 0.5) or np.any(bhi < q_lo - 0.5) for q_lo, q_hi in boxes):
                boxes.append((blo, bhi))

    def clear(p, pts):
        margin = tpl.r_s + 0.3
        if np.any(p < lo + margin) or np.any(p > hi - margin):
            return False
        for blo, bhi in boxes:
            if np.linalg.norm(p - np.clip(p, blo, bhi)) < margin:
                return False
        return all(np.linalg.norm(p - q) >= 2.0 * tpl.r_s + 0.05 for q in pts)

    starts, goals = [], []
    tries = 0
    for pts in (starts, goals):
        while len(pts) < n:
            tries += 1
            if tries > max_tries:
                raise SamplingExhaustedError("could not place robots")
            p = rng.uniform(lo, hi)
            if clear(p, pts):
                pts.append(p)
    robots = [replace(tpl, start=_tup(s), goal=_tup(g), theta0=math.atan2(g[1] - s[1], g[0] - s[0]))
              for s, g in zip(starts, goals)]
    obstacles = tuple(ObstacleSpec(_box_vertices(blo, bhi), tuple(map(tuple, obstacle_cov))) for blo, bhi in boxes)
    return replace(base.with_robots(robots), obstacles=obstacles, seed=seed)
