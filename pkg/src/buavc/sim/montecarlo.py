"""Monte Carlo checks of the shadow, buffer and collision-probability guarantees."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..cells import CellOptions, RobotSnapshot, build_buavc
from ..geometry import VPolytope
from ..mathkit import chi2_inv_cdf, cholesky, erf
from ..separators import (
    GaussianPosition,
    UncertainObstacle,
    best_linear_separator,
    misclassification,
    shadow_epsilon,
)


@dataclass(frozen=True)
class MCResult:
    name: str
    empirical: float
    bound: float
    margin: float  # 3-sigma binomial half-width
    samples: int
    passed: bool
    kind: str = "upper"  # "upper": empirical <= bound + margin; "lower": >= bound - margin; "match": |diff| <= margin

    def line(self) -> str:
        rel = {"upper": "<=", "lower": ">=", "match": "~="}[self.kind]
        return (f"{self.name}: empirical={self.empirical:.6f} {rel} bound={self.bound:.6f} "
                f"(margin {self.margin:.6f}, n={self.samples}) -> {'PASS' if self.passed else 'FAIL'}")


def binomial_margin(p: float, n: int, k: float = 3.0) -> float:
    return k * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _draw(rng, mean, S, n):
    mean = np.asarray(mean, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.all(np.abs(S) <= 1e-18):
        return np.tile(mean, (n, 1))
    L = cholesky(S)
    return mean + rng.standard_normal((n, mean.shape[0])) @ L.T


def lemma1(eps: float, d: int, samples: int, rng, cov=None, tol: Optional[float] = None) -> MCResult:
    """Fraction of translations inside the confidence ellipsoid vs 1 - eps."""
    cov = np.eye(d) if cov is None else np.asarray(cov, dtype=float)
    D = _draw(rng, np.zeros(d), cov, samples)
    Sinv = np.linalg.inv(cov)
    m2 = np.einsum("ki,ij,kj->k", D, Sinv, D)
    emp = float(np.mean(m2 <= chi2_inv_cdf(1.0 - eps, d)))
    margin = binomial_margin(1.0 - eps, samples) if tol is None else tol
    return MCResult(f"lemma1(eps={eps}, d={d})", emp, 1.0 - eps, margin, samples, abs(emp - (1 - eps)) <= margin,
                    "match")


def shadow_containment(obs: UncertainObstacle, delta: float, samples: int, rng) -> MCResult:
    """Fraction of sampled obstacle poses lying fully inside the dilated shadow."""
    W = obs.whitening()
    S = obs.shadow_whitened(delta)
    d = obs.nominal.dim
    D = _draw(rng, np.zeros(d), obs.translation_cov, samples)
    Vw = obs.nominal.vertices @ W.T  # (p, d)
    Dw = D @ W.T
    # vertex k of the translated body in the whitened frame is Vw[k] + Dw
    inside = np.ones(samples, dtype=bool)
    for v in Vw:
        inside &= np.all((v + Dw) @ S.normals.T <= S.offsets + 1e-12, axis=1)
    emp = float(np.mean(inside))
    eps = shadow_epsilon(delta)
    margin = binomial_margin(1.0 - eps, samples)
    return MCResult(f"shadow containment(delta={delta}, d={d})", emp, 1.0 - eps, margin, samples,
                    emp >= 1.0 - eps - margin, "lower")


def lemma2(a, b: float, g: GaussianPosition, samples: int, rng, tol: float = 0.002) -> MCResult:
    a = np.asarray(a, dtype=float)
    X = _draw(rng, g.mean, g.cov, samples)
    emp = float(np.mean(X @ a <= b))
    ref = 0.5 + 0.5 * erf((b - a @ g.mean) / math.sqrt(2.0 * a @ g.cov @ a))
    return MCResult("lemma2", emp, ref, tol, samples, abs(emp - ref) <= tol, "match")


@dataclass(frozen=True)
class PairConfig:
    gi: GaussianPosition
    gj: GaussianPosition
    r_s: float
    delta: float


@dataclass(frozen=True)
class ObstacleConfig:
    g: GaussianPosition
    obstacle: UncertainObstacle
    r_s: float
    delta: float


def _face(cell, tag):
    for f in cell.faces:
        if f.source == tag:
            return f
    raise LookupError(f"cell has no face from {tag!r}")


def worst_case_pair(cfg: PairConfig):
    """Means moved onto their facing cell boundaries, directly across from each other."""
    d = cfg.gi.dim
    opts = CellOptions(None, math.inf)
    ci = build_buavc(RobotSnapshot(0, cfg.gi, np.zeros(d), cfg.r_s), [cfg.gj], [], cfg.delta, opts, [1])
    cj = build_buavc(RobotSnapshot(1, cfg.gj, np.zeros(d), cfg.r_s), [cfg.gi], [], cfg.delta, opts, [0])
    fi, fj = _face(ci, ("robot", 1)), _face(cj, ("robot", 0))
    a = fi.base.a
    pi = cfg.gi.mean + (fi.b_eff - a @ cfg.gi.mean) * a
    # j's boundary along a: (-a_j) . x = b_eff_j, with a_j = -a up to rounding
    aj = fj.base.a
    t = (fj.b_eff - aj @ pi) / (aj @ a)
    pj = pi + t * a
    return pi, pj, ci, cj


def theorem2(cfg: PairConfig, samples: int, rng, placement=None) -> MCResult:
    if placement is None:
        pi, pj, _, _ = worst_case_pair(cfg)
    else:
        pi, pj = placement
    Xi = _draw(rng, pi, cfg.gi.cov, samples)
    Xj = _draw(rng, pj, cfg.gj.cov, samples)
    col = np.einsum("ki,ki->k", Xi - Xj, Xi - Xj) < (2.0 * cfg.r_s) ** 2
    emp = float(np.mean(col))
    margin = binomial_margin(cfg.delta, samples)
    return MCResult(f"theorem2(delta={cfg.delta})", emp, cfg.delta, margin, samples, emp <= cfg.delta + margin)


def polygon_distance(Q: np.ndarray, V: VPolytope) -> np.ndarray:
    """Euclidean distance from each row of Q to the convex body V (2D polygons, 3D boxes)."""
    if V.dim == 3:
        lo, hi = V.vertices.min(axis=0), V.vertices.max(axis=0)
        if len(V.vertices) != 8 or not np.all(np.isclose(V.vertices, lo) | np.isclose(V.vertices, hi)):
            raise NotImplementedError("3D distance is implemented for axis-aligned boxes")
        gap = np.maximum(np.maximum(lo - Q, 0.0), Q - hi)
        return np.sqrt(np.einsum("ki,ki->k", gap, gap))
    P = V.vertices
    E = np.roll(P, -1, axis=0) - P
    inside = np.all(Q @ V.normals.T <= V.offsets, axis=1)
    best = np.full(Q.shape[0], np.inf)
    for p0, e in zip(P, E):
        t = np.clip(((Q - p0) @ e) / (e @ e), 0.0, 1.0)
        diff = Q - (p0 + t[:, None] * e)
        best = np.minimum(best, np.einsum("ki,ki->k", diff, diff))
    out = np.sqrt(best)
    out[inside] = 0.0
    return out


def worst_case_obstacle(cfg: ObstacleConfig):
    d = cfg.g.dim
    cell = build_buavc(RobotSnapshot(0, cfg.g, np.zeros(d), cfg.r_s), [], [cfg.obstacle], cfg.delta,
                       CellOptions(None, math.inf))
    f = _face(cell, ("obstacle", 0))
    a = f.base.a
    return cfg.g.mean + (f.b_eff - a @ cfg.g.mean) * a, cell


def theorem3(cfg: ObstacleConfig, samples: int, rng, placement=None) -> MCResult:
    p = worst_case_obstacle(cfg)[0] if placement is None else np.asarray(placement, dtype=float)
    # robot at x, obstacle shifted by s: distance from x - s to the nominal body
    Q = _draw(rng, p, cfg.g.cov + cfg.obstacle.translation_cov, samples)
    col = polygon_distance(Q, cfg.obstacle.nominal) < cfg.r_s
    emp = float(np.mean(col))
    margin = binomial_margin(cfg.delta, samples)
    return MCResult(f"theorem3(delta={cfg.delta})", emp, cfg.delta, margin, samples, emp <= cfg.delta + margin)


def grid_minimax(gi: GaussianPosition, gj: GaussianPosition, n_angles: int = 20000, n_offsets: int = 0):
    """Brute-force min over unit normals of the larger misclassification probability (2D).

    Returns ``(probability, standardized margin)``.

    For each angle the best offset equalizes the two standardized margins
    in closed form; ``n_offsets > 0`` searches a dense offset grid instead.
    """
    ang = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    A = np.column_stack([np.cos(ang), np.sin(ang)])
    si = np.sqrt(np.einsum("ki,ij,kj->k", A, gi.cov, A))
    sj = np.sqrt(np.einsum("ki,ij,kj->k", A, gj.cov, A))
    ai, aj = A @ gi.mean, A @ gj.mean
    if n_offsets <= 0:
        u = (aj - ai) / (si + sj)
    else:
        f = np.linspace(0.0, 1.0, n_offsets)
        B = ai[:, None] + f[None, :] * (aj - ai)[:, None]
        u1 = (B - ai[:, None]) / si[:, None]
        u2 = (aj[:, None] - B) / sj[:, None]
        u = np.max(np.minimum(u1, u2), axis=1)
    best = float(np.max(u))
    return 0.5 - 0.5 * erf(best / math.sqrt(2.0)), best


def separator_minimax(gi: GaussianPosition, gj: GaussianPosition, tol: float = 1e-4) -> MCResult:
    """Compares standardized margins: ours must be at least the grid optimum minus ``tol``."""
    h = best_linear_separator(gi, gj)
    _, _, u1, u2 = misclassification(h, gi, gj)
    ours = min(u1, u2)
    _, oracle = grid_minimax(gi, gj)
    ok = ours >= oracle - tol and abs(u1 - u2) <= 1e-8
    return MCResult("separator-minimax (margin)", ours, oracle, tol, 0, ok, "lower")


def mc_verify_theorem(config, samples: int, rng) -> MCResult:
    """Empirical collision frequency at the worst-case mean placement, against delta."""
    if isinstance(config, PairConfig):
        return theorem2(config, samples, rng)
    if isinstance(config, ObstacleConfig):
        return theorem3(config, samples, rng)
    raise TypeError("config must be a PairConfig or an ObstacleConfig")


def random_spd(rng, d: int, lo: float = 0.02, hi: float = 0.3) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    s = rng.uniform(lo, hi, d)
    return Q @ np.diag(s * s) @ Q.T
