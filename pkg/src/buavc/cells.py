"""Buffered uncertainty-aware Voronoi cells and the deterministic BVC baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    Chebyshev,
    HPolytope,
    Hyperplane,
    chebyshev_center,
    distance_to_polytope,
    normalize,
)
from .mathkit import erf_inv
from .separators import (
    CoincidentMeansError,
    GaussianPosition,
    RobotInsideShadowError,
    UncertainObstacle,
    best_linear_separator,
    obstacle_separator,
)


def _check_unit(h: Hyperplane):
    if not h.normalized:
        raise ValueError("buffer requires a unit-normal hyperplane")


def buffer_radius(h: Hyperplane, r_s: float) -> float:
    _check_unit(h)
    return r_s * float(np.linalg.norm(h.a))


def buffer_chance(h: Hyperplane, S, delta: float) -> float:
    _check_unit(h)
    if not 0.0 < delta < 0.75:
        raise ValueError(f"delta must lie in (0, 0.75), got {delta}")
    y = 2.0 * math.sqrt(1.0 - delta) - 1.0
    val = math.sqrt(2.0 * float(h.a @ np.asarray(S) @ h.a)) * erf_inv(y)
    return max(val, 0.0)


def buffer_stopping(h: Hyperplane, v, acc_max: float) -> float:
    _check_unit(h)
    if acc_max <= 0:
        raise ValueError("acc_max must be positive")
    av = float(h.a @ np.asarray(v, dtype=float))
    return av * av / (2.0 * acc_max) if av > 0.0 else 0.0


@dataclass(frozen=True)
class BufferedFace:
    base: Hyperplane
    beta_r: float = 0.0
    beta_delta: float = 0.0
    beta_s: float = 0.0
    source: object = "workspace"

    @property
    def b_eff(self) -> float:
        return self.base.b - self.beta_r - self.beta_delta - self.beta_s


@dataclass(frozen=True, eq=False)
class BUAVC:
    owner: object
    faces: tuple
    empty: bool
    chebyshev: Chebyshev
    reason: Optional[str] = None
    _poly: Optional[HPolytope] = field(default=None, repr=False)

    @property
    def polytope(self) -> HPolytope:
        if self._poly is not None:
            return self._poly
        d = self.faces[0].base.a.shape[0] if self.faces else 2
        A = np.array([f.base.a for f in self.faces]).reshape(-1, d)
        b = np.array([f.b_eff for f in self.faces])
        poly = HPolytope(A, b, self.owner)
        object.__setattr__(self, "_poly", poly)
        return poly

    @property
    def face_count(self) -> int:
        return len(self.faces)


@dataclass(frozen=True, eq=False)
class RobotSnapshot:
    id: object
    position: GaussianPosition
    velocity: np.ndarray
    r_s: float
    acc_max: Optional[float] = None


@dataclass(frozen=True)
class CellOptions:
    workspace: Optional[HPolytope] = None
    sensing_range: float = 2.0
    stopping_buffer: bool = False
    workspace_chance: bool = False


def _finish(owner, faces, reason=None) -> BUAVC:
    if reason is not None:
        return BUAVC(owner, tuple(faces), True, Chebyshev(None, -np.inf), reason)
    cell = BUAVC(owner, tuple(faces), False, Chebyshev(None, np.inf))
    cheb = chebyshev_center(cell.polytope)
    empty = cheb.radius < 0.0
    return BUAVC(owner, cell.faces, empty, cheb, "infeasible" if empty else None, cell.polytope)


def build_buavc(me: RobotSnapshot, others: Sequence[GaussianPosition], obstacles: Sequence[UncertainObstacle],
                delta: float, options: CellOptions = CellOptions(), other_ids: Optional[Sequence] = None) -> BUAVC:
    """Assemble the robot's buffered cell; geometric failures give an empty-flagged cell."""
    p = me.position.mean
    S = me.position.cov
    rng_sq = options.sensing_range ** 2
    ids = list(other_ids) if other_ids is not None else list(range(len(others)))

    def stop(h):
        if options.stopping_buffer and me.acc_max is not None:
            return buffer_stopping(h, me.velocity, me.acc_max)
        return 0.0

    faces = []
    reason = None
    for jid, gj in zip(ids, others):
        if float((gj.mean - p) @ (gj.mean - p)) > rng_sq:
            continue
        try:
            h = best_linear_separator(me.position, gj)
        except CoincidentMeansError:
            reason = "coincident"
            continue
        faces.append(BufferedFace(h, buffer_radius(h, me.r_s), buffer_chance(h, S, delta), stop(h), ("robot", jid)))
    for k, obs in enumerate(obstacles):
        if distance_to_polytope(p, obs.nominal) > options.sensing_range:
            continue
        try:
            h = obstacle_separator(p, obs, delta)
        except RobotInsideShadowError:
            reason = "inside-shadow"
            continue
        faces.append(BufferedFace(h, buffer_radius(h, me.r_s), buffer_chance(h, S, delta), stop(h), ("obstacle", k)))
    if options.workspace is not None:
        for h in options.workspace.faces:
            h = normalize(h)
            bd = buffer_chance(h, S, delta) if options.workspace_chance else 0.0
            faces.append(BufferedFace(h, buffer_radius(h, me.r_s), bd, stop(h), "workspace"))
    return _finish(me.id, faces, reason)


def build_bvc(p, others, r_s: float, workspace: Optional[HPolytope] = None) -> HPolytope:
    """Voronoi cell of ``p`` retracted by ``r_s`` (plain Voronoi cell for r_s = 0)."""
    p = np.asarray(p, dtype=float)
    faces = []
    for q in others:
        q = np.asarray(q, dtype=float)
        pij = q - p
        n = float(np.linalg.norm(pij))
        if n <= 1e-9:
            raise CoincidentMeansError("coincident robot positions")
        faces.append(Hyperplane(pij / n, float(pij @ (p + q)) / (2.0 * n) - r_s))
    if workspace is not None:
        faces.extend(Hyperplane(h.a, h.b - r_s) for h in workspace.faces)
    return HPolytope.from_faces(faces, owner="bvc", dim=p.shape[0])


def bvc_cell(me: RobotSnapshot, others: Sequence[GaussianPosition], options: CellOptions = CellOptions(),
             inflation: float = 0.0, other_ids: Optional[Sequence] = None) -> BUAVC:
    """BVC baseline wrapped as a cell; the safety radius is enlarged by ``inflation`` (0.1 = +10%)."""
    p = me.position.mean
    r = me.r_s * (1.0 + inflation)
    ids = list(other_ids) if other_ids is not None else list(range(len(others)))
    faces = []
    reason = None
    for jid, gj in zip(ids, others):
        q = gj.mean
        if float((q - p) @ (q - p)) > options.sensing_range ** 2:
            continue
        pij = q - p
        n = float(np.linalg.norm(pij))
        if n <= 1e-9:
            reason = "coincident"
            continue
        h = Hyperplane(pij / n, float(pij @ (p + q)) / (2.0 * n))
        faces.append(BufferedFace(h, r, 0.0, 0.0, ("robot", jid)))
    if options.workspace is not None:
        for h in options.workspace.faces:
            faces.append(BufferedFace(normalize(h), r, 0.0, 0.0, "workspace"))
    return _finish(me.id, faces, reason)
